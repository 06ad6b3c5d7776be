//! SVG rendering of two-dimensional atlases.

use std::fmt::Write;

use crate::atlas::Atlas;
use crate::error::{Error, Result};
use crate::geom::Polytope;

#[derive(Clone, Debug, PartialEq)]
pub struct SvgOptions {
    /// Drawing size in pixels, excluding the margin.
    pub size: f64,
    pub margin: f64,
    /// Plot window `[xmin, xmax, ymin, ymax]`; defaults to the bounding box of the state set.
    pub window: Option<[f64; 4]>,
    pub show_terminal: bool,
    pub label_regions: bool,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions { size: 600.0, margin: 20.0, window: None, show_terminal: true, label_regions: false }
    }
}

const PERSISTENT_FILL: &str = "#ffffff";
const TRANSIENT_FILL: &str = "#a0a0a0";
const TERMINAL_STROKE: &str = "#c03030";

struct Frame {
    window: [f64; 4],
    size: f64,
    margin: f64,
}

impl Frame {
    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let [x0, x1, y0, y1] = self.window;
        let sx = self.margin + (x - x0) / (x1 - x0) * self.size;
        let sy = self.margin + (y1 - y) / (y1 - y0) * self.size;
        (sx, sy)
    }

    fn points(&self, verts: &[[f64; 2]]) -> String {
        let mut s = String::new();
        for (i, v) in verts.iter().enumerate() {
            let (x, y) = self.px(v[0], v[1]);
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{},{}", fmt(x), fmt(y));
        }
        s
    }
}

fn fmt(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" { "0.000".into() } else { s }
}

/// Renders one polygon per region. Persistent-form regions are white, the
/// rest grey; the terminal set is drawn as an outline on top.
pub fn export_svg(atlas: &Atlas, opts: &SvgOptions) -> Result<String> {
    let n = atlas.setup.spec.n();
    if n != 2 {
        return Err(Error::DimensionMismatch(format!("SVG export needs n = 2, got n = {n}")));
    }
    let window = match opts.window {
        Some(w) => w,
        None => {
            let (lo, hi) = atlas.setup.spec.x_set.bounding_box()?;
            [lo[0], hi[0], lo[1], hi[1]]
        }
    };
    if !(window[1] > window[0] && window[3] > window[2]) {
        return Err(Error::InvalidProblem("empty plot window".into()));
    }
    let frame = Frame { window, size: opts.size, margin: opts.margin };
    let total = opts.size + 2.0 * opts.margin;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{t}" height="{t}" viewBox="0 0 {t} {t}">"#,
        t = fmt(total)
    );
    let _ = writeln!(s, "<title>horizon {} atlas, {} regions</title>", atlas.horizon, atlas.regions.len());
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{t}" height="{t}" fill="#ffffff"/>"##, t = fmt(total));
    s.push_str("<g id=\"regions\" stroke=\"#000000\" stroke-width=\"0.5\">\n");
    for r in &atlas.regions {
        let verts = r.region.vertices2d()?;
        let persistent = r.flags.persistent || r.active_set.is_persistent_form();
        let (class, fill) = if persistent { ("persistent", PERSISTENT_FILL) } else { ("transient", TRANSIENT_FILL) };
        let _ = writeln!(
            s,
            r#"<polygon class="region {class}" data-tuple="{}" fill="{fill}" points="{}"/>"#,
            r.active_set,
            frame.points(&verts)
        );
    }
    s.push_str("</g>\n");
    if opts.label_regions {
        s.push_str("<g id=\"labels\" font-family=\"monospace\" font-size=\"7\" text-anchor=\"middle\">\n");
        for r in &atlas.regions {
            if let Ok((c, _)) = r.region.chebyshev_center() {
                let (x, y) = frame.px(c[0], c[1]);
                let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, fmt(x), fmt(y), r.active_set);
            }
        }
        s.push_str("</g>\n");
    }
    if opts.show_terminal {
        let t: &Polytope = &atlas.setup.terminal.t;
        let verts = t.vertices2d()?;
        let _ = writeln!(
            s,
            r#"<polygon id="terminal" class="terminal" fill="none" stroke="{TERMINAL_STROKE}" stroke-width="1.5" stroke-dasharray="4 2" points="{}"/>"#,
            frame.points(&verts)
        );
    }
    axes(&mut s, &frame);
    s.push_str("</svg>\n");
    Ok(s)
}

fn axes(s: &mut String, f: &Frame) {
    let [x0, x1, y0, y1] = f.window;
    s.push_str("<g id=\"axes\" stroke=\"#000000\" stroke-width=\"1\" fill=\"none\">\n");
    let (a, b) = f.px(x0, y1);
    let (c, d) = f.px(x1, y0);
    let _ = writeln!(s, r#"<rect x="{}" y="{}" width="{}" height="{}"/>"#, fmt(a), fmt(b), fmt(c - a), fmt(d - b));
    if (x0..=x1).contains(&0.0) {
        let (p, q) = f.px(0.0, y0);
        let (_, r) = f.px(0.0, y1);
        let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke-width="0.5"/>"#, fmt(p), fmt(q), fmt(p), fmt(r));
    }
    if (y0..=y1).contains(&0.0) {
        let (p, q) = f.px(x0, 0.0);
        let (r, _) = f.px(x1, 0.0);
        let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke-width="0.5"/>"#, fmt(p), fmt(q), fmt(r), fmt(q));
    }
    s.push_str("</g>\n");
}
