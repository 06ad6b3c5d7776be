//! Stage-structured active-set tuples.

use std::collections::BTreeSet;
use std::fmt;

use crate::condense::StageLayout;
use crate::error::{Error, Result};

/// One bit per constraint row, grouped into `horizon` stage blocks and a terminal block.
///
/// The derived order compares bits first, so sorting gives the canonical
/// lexicographic order used for atlases.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActiveSetTuple {
    bits: Vec<bool>,
    layout: StageLayout,
}

impl ActiveSetTuple {
    pub fn new(bits: Vec<bool>, layout: StageLayout) -> Result<Self> {
        if bits.len() != layout.q() {
            return Err(Error::LengthMismatch { expected: layout.q(), got: bits.len() });
        }
        Ok(Self { bits, layout })
    }

    pub fn empty(layout: StageLayout) -> Self {
        Self { bits: vec![false; layout.q()], layout }
    }

    /// Tuple from a 1-based index set.
    pub fn from_indices<I: IntoIterator<Item = usize>>(idx: I, layout: StageLayout) -> Result<Self> {
        let q = layout.q();
        let mut bits = vec![false; q];
        for i in idx {
            if i == 0 || i > q {
                return Err(Error::IndexOutOfRange { index: i, q });
            }
            bits[i - 1] = true;
        }
        Ok(Self { bits, layout })
    }

    /// 1-based indices of the active rows.
    pub fn to_indices(&self) -> BTreeSet<usize> {
        self.active_rows().into_iter().map(|i| i + 1).collect()
    }

    /// 0-based indices of the active rows, ascending.
    pub fn active_rows(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&i| self.bits[i]).collect()
    }

    pub fn inactive_rows(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&i| !self.bits[i]).collect()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn layout(&self) -> StageLayout {
        self.layout
    }

    pub fn horizon(&self) -> usize {
        self.layout.horizon
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_active(&self, row: usize) -> bool {
        self.bits[row]
    }

    pub fn stage(&self, k: usize) -> &[bool] {
        let w = self.layout.stage_width();
        &self.bits[k * w..(k + 1) * w]
    }

    pub fn terminal(&self) -> &[bool] {
        &self.bits[self.layout.row_origin(self.layout.horizon)..]
    }

    /// `prefix` as a new stage 0 in front of `a`.
    pub fn concat(prefix: &[bool], a: &ActiveSetTuple) -> Result<Self> {
        let w = a.layout.stage_width();
        if prefix.len() != w {
            return Err(Error::LengthMismatch { expected: w, got: prefix.len() });
        }
        let mut bits = prefix.to_vec();
        bits.extend_from_slice(&a.bits);
        Ok(Self { bits, layout: a.layout.with_horizon(a.horizon() + 1) })
    }

    /// Removes the leading `l` stages.
    pub fn drop_stages(&self, l: usize) -> Result<Self> {
        let n = self.horizon();
        if l >= n {
            return Err(Error::BadStageCount { drop: l, horizon: n });
        }
        let cut = l * self.layout.stage_width();
        Ok(Self { bits: self.bits[cut..].to_vec(), layout: self.layout.with_horizon(n - l) })
    }

    /// All terminal bits are zero.
    pub fn is_persistent_form(&self) -> bool {
        self.terminal().iter().all(|&b| !b)
    }

    /// Persistent form with a nonzero last stage.
    pub fn is_outmost(&self) -> bool {
        self.is_persistent_form() && self.stage(self.horizon() - 1).iter().any(|&b| b)
    }

    /// Inserts `l` inactive stages in front of the terminal block.
    pub fn pad_with_zero_stages(&self, l: usize) -> Result<Self> {
        if !self.is_persistent_form() {
            return Err(Error::NotPersistentForm(self.clone()));
        }
        let mut bits = self.bits.clone();
        bits.extend(std::iter::repeat_n(false, l * self.layout.stage_width()));
        Ok(Self { bits, layout: self.layout.with_horizon(self.horizon() + l) })
    }

    /// Inverse of padding by one stage: removes an all-zero last stage in front
    /// of an all-zero terminal block. `None` if the tuple does not have that form.
    pub fn strip_zero_stage(&self) -> Option<Self> {
        let n = self.horizon();
        if n < 2 || !self.is_persistent_form() || self.stage(n - 1).iter().any(|&b| b) {
            return None;
        }
        let w = self.layout.stage_width();
        let mut bits = self.bits[..(n - 1) * w].to_vec();
        bits.extend_from_slice(self.terminal());
        Some(Self { bits, layout: self.layout.with_horizon(n - 1) })
    }

    /// `pad(drop(a, l), l)` for `l = 1..N-1`, without repeats and without `a` itself.
    pub fn persistent_offspring(&self) -> Result<Vec<Self>> {
        if !self.is_persistent_form() {
            return Err(Error::NotPersistentForm(self.clone()));
        }
        let mut out: Vec<Self> = Vec::new();
        for l in 1..self.horizon() {
            let child = self.drop_stages(l)?.pad_with_zero_stages(l)?;
            if child != *self && !out.contains(&child) {
                out.push(child);
            }
        }
        Ok(out)
    }

    pub fn to_backward_order(&self) -> BackwardTuple {
        let mut blocks = vec![self.terminal().to_vec()];
        for k in (0..self.horizon()).rev() {
            blocks.push(self.stage(k).to_vec());
        }
        BackwardTuple { bits: blocks.concat(), layout: self.layout }
    }

    /// Parses the dotted text form. The horizon is read from the number of
    /// blocks; stage widths come from `template`.
    pub fn parse(text: &str, template: StageLayout) -> Result<Self> {
        let bad = || Error::BadTupleText(text.to_string());
        let blocks: Vec<&str> = text.split('.').collect();
        let (terminal, stages) = blocks.split_last().ok_or_else(bad)?;
        if stages.is_empty()
            || terminal.len() != template.qt
            || stages.iter().any(|s| s.len() != template.stage_width())
        {
            return Err(bad());
        }
        let bits = text
            .chars()
            .filter(|&c| c != '.')
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(bad()),
            })
            .collect::<Result<Vec<bool>>>()?;
        Self::new(bits, template.with_horizon(stages.len()))
    }
}

fn write_blocks(f: &mut fmt::Formatter<'_>, bits: &[bool], widths: &[usize]) -> fmt::Result {
    let mut at = 0;
    for (j, &w) in widths.iter().enumerate() {
        if j > 0 {
            f.write_str(".")?;
        }
        for &b in &bits[at..at + w] {
            f.write_str(if b { "1" } else { "0" })?;
        }
        at += w;
    }
    Ok(())
}

impl fmt::Display for ActiveSetTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut widths = vec![self.layout.stage_width(); self.horizon()];
        widths.push(self.layout.qt);
        write_blocks(f, &self.bits, &widths)
    }
}

impl fmt::Debug for ActiveSetTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ActiveSetTuple({self})")
    }
}

impl serde::Serialize for ActiveSetTuple {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Tuple with the stage blocks in reverse: terminal block first, stage 0 last.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BackwardTuple {
    bits: Vec<bool>,
    layout: StageLayout,
}

impl BackwardTuple {
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn to_indices(&self) -> BTreeSet<usize> {
        (0..self.bits.len()).filter(|&i| self.bits[i]).map(|i| i + 1).collect()
    }

    pub fn to_forward_order(&self) -> ActiveSetTuple {
        let qt = self.layout.qt;
        let w = self.layout.stage_width();
        let mut bits = Vec::with_capacity(self.bits.len());
        for k in (0..self.layout.horizon).rev() {
            bits.extend_from_slice(&self.bits[qt + k * w..qt + (k + 1) * w]);
        }
        bits.extend_from_slice(&self.bits[..qt]);
        ActiveSetTuple { bits, layout: self.layout }
    }
}

impl fmt::Display for BackwardTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut widths = vec![self.layout.qt];
        widths.extend(std::iter::repeat_n(self.layout.stage_width(), self.layout.horizon));
        write_blocks(f, &self.bits, &widths)
    }
}

impl fmt::Debug for BackwardTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BackwardTuple({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const L1: StageLayout = StageLayout { horizon: 1, qx: 4, qu: 2, qt: 4 };

    fn t(s: &str) -> ActiveSetTuple {
        ActiveSetTuple::parse(s, L1).unwrap()
    }

    #[test]
    fn indices_to_text() {
        assert_eq!(ActiveSetTuple::from_indices([1], L1).unwrap().to_string(), "100000.0000");
        assert_eq!(ActiveSetTuple::from_indices([10], L1).unwrap().to_string(), "000000.0001");
        assert_eq!(ActiveSetTuple::from_indices([], L1).unwrap().to_string(), "000000.0000");
        assert!(matches!(
            ActiveSetTuple::from_indices([11], L1),
            Err(Error::IndexOutOfRange { index: 11, q: 10 })
        ));
        assert!(ActiveSetTuple::from_indices([0], L1).is_err());
    }

    #[test]
    fn concat_prepends_a_stage() {
        let p = [true, false, false, false, false, false];
        let a = ActiveSetTuple::concat(&p, &t("100000.0000")).unwrap();
        assert_eq!(a.to_string(), "100000.100000.0000");
        let z = ActiveSetTuple::concat(&[false; 6], &t("010000.0001")).unwrap();
        assert_eq!(z.to_string(), "000000.010000.0001");
        assert!(matches!(
            ActiveSetTuple::concat(&[true], &t("100000.0000")),
            Err(Error::LengthMismatch { expected: 6, got: 1 })
        ));
    }

    #[test]
    fn drop_leading_stages() {
        assert_eq!(t("010000.100000.0000").drop_stages(1).unwrap().to_string(), "100000.0000");
        assert_eq!(t("010000.100000.0000").drop_stages(0).unwrap(), t("010000.100000.0000"));
        assert_eq!(t("000000.000000.0000").drop_stages(1).unwrap(), t("000000.0000"));
        assert!(matches!(t("100000.0000").drop_stages(1), Err(Error::BadStageCount { drop: 1, horizon: 1 })));
    }

    #[test]
    fn persistent_form() {
        assert!(t("000000.100000.0000").is_persistent_form());
        assert!(!t("000000.0001").is_persistent_form());
        assert!(t("000000.0000").is_persistent_form());
        assert!(t("000000.100000.0000").is_outmost());
        assert!(!t("100000.000000.0000").is_outmost());
    }

    #[test]
    fn padding() {
        assert_eq!(t("100000.0000").pad_with_zero_stages(1).unwrap().to_string(), "100000.000000.0000");
        assert_eq!(t("100000.0000").pad_with_zero_stages(0).unwrap(), t("100000.0000"));
        assert!(matches!(t("000000.0001").pad_with_zero_stages(1), Err(Error::NotPersistentForm(_))));
    }

    #[test]
    fn strip_requires_zero_tail() {
        assert_eq!(t("100000.000000.0000").strip_zero_stage(), Some(t("100000.0000")));
        assert_eq!(t("000000.100000.0000").strip_zero_stage(), None);
        assert_eq!(t("000000.000000.0001").strip_zero_stage(), None);
        assert_eq!(t("000000.0000").strip_zero_stage(), None);
    }

    #[test]
    fn offspring() {
        let kids = t("100000.100000.0000").persistent_offspring().unwrap();
        assert_eq!(kids, vec![t("100000.000000.0000")]);
        let kids = t("010000.100000.0000").persistent_offspring().unwrap();
        assert_eq!(kids, vec![t("100000.000000.0000")]);
        assert!(t("000000.000000.000000.0000").persistent_offspring().unwrap().is_empty());
        let kids = t("000000.010000.100000.0000").persistent_offspring().unwrap();
        assert_eq!(kids, vec![t("010000.100000.000000.0000"), t("100000.000000.000000.0000")]);
    }

    #[test]
    fn backward_order() {
        let b = t("100000.0000").to_backward_order();
        assert_eq!(b.to_string(), "0000.100000");
        assert_eq!(b.to_indices(), BTreeSet::from([5]));
        assert_eq!(t("100000.100000.0000").to_backward_order().to_string(), "0000.100000.100000");
        assert_eq!(t("010000.100000.0000").to_backward_order().to_string(), "0000.100000.010000");
    }

    #[test]
    fn parse_rejects_malformed_text() {
        for bad in ["", "100000", "10000.0000", "100000.000", "100x00.0000", "100000..0000"] {
            assert!(ActiveSetTuple::parse(bad, L1).is_err(), "{bad}");
        }
    }

    #[test]
    fn canonical_order_is_lexicographic() {
        let mut v = [t("100000.0000"), t("000000.0001"), t("000000.0000"), t("010000.0000")];
        v.sort();
        let s: Vec<String> = v.iter().map(|a| a.to_string()).collect();
        assert_eq!(s, ["000000.0000", "000000.0001", "010000.0000", "100000.0000"]);
    }

    #[test]
    fn index_round_trip_is_exhaustive_for_q16() {
        let layout = StageLayout { horizon: 2, qx: 4, qu: 2, qt: 4 };
        for mask in 0u32..(1 << 16) {
            let idx: BTreeSet<usize> = (0..16).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect();
            let a = ActiveSetTuple::from_indices(idx.iter().copied(), layout).unwrap();
            assert_eq!(a.to_indices(), idx);
        }
    }

    fn tuple_strategy() -> impl Strategy<Value = ActiveSetTuple> {
        (1usize..5, 1usize..4, 1usize..3, 1usize..5).prop_flat_map(|(n, qx, qu, qt)| {
            let layout = StageLayout { horizon: n, qx, qu, qt };
            prop::collection::vec(any::<bool>(), layout.q())
                .prop_map(move |bits| ActiveSetTuple::new(bits, layout).unwrap())
        })
    }

    fn persistent_strategy() -> impl Strategy<Value = ActiveSetTuple> {
        tuple_strategy().prop_map(|a| {
            let mut bits = a.bits().to_vec();
            let start = a.layout().row_origin(a.horizon());
            bits[start..].iter_mut().for_each(|b| *b = false);
            ActiveSetTuple::new(bits, a.layout()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn text_round_trip(a in tuple_strategy()) {
            let back = ActiveSetTuple::parse(&a.to_string(), a.layout()).unwrap();
            prop_assert_eq!(back, a);
        }

        #[test]
        fn concat_then_drop_is_identity(a in tuple_strategy(), seed in any::<u64>()) {
            let w = a.layout().stage_width();
            let prefix: Vec<bool> = (0..w).map(|i| seed >> (i % 64) & 1 == 1).collect();
            let c = ActiveSetTuple::concat(&prefix, &a).unwrap();
            prop_assert_eq!(c.horizon(), a.horizon() + 1);
            prop_assert_eq!(c.drop_stages(1).unwrap(), a);
        }

        #[test]
        fn strip_undoes_pad(a in persistent_strategy()) {
            prop_assert_eq!(a.pad_with_zero_stages(1).unwrap().strip_zero_stage(), Some(a.clone()));
        }

        #[test]
        fn backward_is_an_involution(a in tuple_strategy()) {
            prop_assert_eq!(a.to_backward_order().to_forward_order(), a);
        }

        #[test]
        fn backward_moves_terminal_zeros_to_front(a in persistent_strategy()) {
            let b = a.to_backward_order();
            prop_assert!(b.bits()[..a.layout().qt].iter().all(|&x| !x));
        }

        #[test]
        fn offspring_are_persistent_and_distinct(a in persistent_strategy()) {
            let kids = a.persistent_offspring().unwrap();
            let set: BTreeSet<_> = kids.iter().cloned().collect();
            prop_assert_eq!(set.len(), kids.len());
            for k in &kids {
                prop_assert!(k.is_persistent_form());
                prop_assert_eq!(k.horizon(), a.horizon());
                prop_assert!(k.count() <= a.count());
                prop_assert!(k != &a);
            }
        }

        #[test]
        fn drop_pad_keeps_retained_bits(a in persistent_strategy(), l in 0usize..4) {
            let l = l.min(a.horizon() - 1);
            let d = a.drop_stages(l).unwrap();
            let kept: usize = (l..a.horizon()).map(|k| a.stage(k).iter().filter(|&&b| b).count()).sum();
            prop_assert_eq!(d.pad_with_zero_stages(l).unwrap().count(), kept);
            prop_assert!(d.pad_with_zero_stages(l).unwrap().is_persistent_form());
        }
    }
}
