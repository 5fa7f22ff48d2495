//! SVG rendering of a report's credible set.
//!
//! Variables are drawn as a row of boxes, grouped under one bar per block
//! (blocks ordered by smallest index, variables by index). Box fill encodes
//! the block PIP. Under each block its retained sub-models are drawn as rows
//! of cells, filled when the variable is included, with the row tinted by the
//! sub-model's mass. Both encodings use one linear ramp between `light` (0)
//! and `dark` (1).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::report::Report;
use crate::io::write_atomic;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvgStyle {
    pub light: [u8; 3],
    pub dark: [u8; 3],
    pub cell: f64,
    pub block_gap: f64,
    pub margin: f64,
    pub bar_height: f64,
    pub font_size: f64,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            light: [0xf1, 0xf5, 0xfb],
            dark: [0x08, 0x45, 0x94],
            cell: 28.0,
            block_gap: 10.0,
            margin: 12.0,
            bar_height: 6.0,
            font_size: 11.0,
        }
    }
}

impl SvgStyle {
    /// Color at `t ∈ [0, 1]` on the light-to-dark ramp.
    pub fn ramp(&self, t: f64) -> String {
        let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
        let c: Vec<u8> = (0..3)
            .map(|i| (self.light[i] as f64 + t * (self.dark[i] as f64 - self.light[i] as f64)).round() as u8)
            .collect();
        format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
    }

    fn text_color(&self, t: f64) -> &'static str {
        if t > 0.55 {
            "#ffffff"
        } else {
            "#1a1a1a"
        }
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn render_svg(report: &Report, style: &SvgStyle) -> String {
    let mut body = String::new();
    let (width, height) = match &report.credible_set {
        None => {
            let msg = report.error.as_ref().map_or("no credible set", |e| e.message.as_str());
            writeln!(
                body,
                r#"<text class="message" x="{m:.1}" y="{y:.1}" font-size="{f:.1}">{}</text>"#,
                escape(msg),
                m = style.margin,
                y = style.margin + style.font_size,
                f = style.font_size
            )
            .unwrap();
            (style.margin * 2.0 + 8.0 * msg.len() as f64, style.margin * 2.0 + style.font_size * 2.0)
        }
        Some(set) => {
            let c = style.cell;
            let caption_y = style.margin + style.font_size;
            writeln!(
                body,
                r#"<text class="caption" x="{:.1}" y="{:.1}" font-size="{:.1}">{:.0}% Cartesian credible set: mass {:.4}, {} models</text>"#,
                style.margin,
                caption_y,
                style.font_size,
                set.lambda * 100.0,
                set.mass,
                set.size
            )
            .unwrap();
            let bar_y = caption_y + style.font_size * 0.8;
            let box_y = bar_y + style.bar_height + 2.0;
            let rows_y = box_y + c + 6.0;
            let mut x = style.margin;
            let mut max_rows = 0usize;
            for block in &set.blocks {
                let w = c * block.variables.len() as f64;
                writeln!(
                    body,
                    r##"<rect class="block-bar" x="{x:.1}" y="{bar_y:.1}" width="{w:.1}" height="{:.1}" fill="#222222"/>"##,
                    style.bar_height
                )
                .unwrap();
                let fill = style.ramp(block.block_pip);
                for (k, label) in block.labels.iter().enumerate() {
                    let bx = x + c * k as f64;
                    writeln!(
                        body,
                        r##"<rect class="var-box" x="{bx:.1}" y="{box_y:.1}" width="{c:.1}" height="{c:.1}" fill="{fill}" stroke="#222222" stroke-width="1"><title>{} block PIP {:.4}</title></rect>"##,
                        escape(label),
                        block.block_pip
                    )
                    .unwrap();
                    writeln!(
                        body,
                        r#"<text class="var-label" x="{:.1}" y="{:.1}" font-size="{:.1}" text-anchor="middle" fill="{}">{}</text>"#,
                        bx + c / 2.0,
                        box_y + c / 2.0 + style.font_size / 3.0,
                        style.font_size,
                        style.text_color(block.block_pip),
                        escape(label)
                    )
                    .unwrap();
                }
                let half = c / 2.0;
                for (r, member) in block.members.iter().enumerate() {
                    let ry = rows_y + half * r as f64;
                    writeln!(
                        body,
                        r#"<rect class="submodel-row" x="{x:.1}" y="{ry:.1}" width="{w:.1}" height="{half:.1}" fill="{}"><title>{} mass {:.4}</title></rect>"#,
                        style.ramp(member.mass),
                        member.bits,
                        member.mass
                    )
                    .unwrap();
                    for (k, bit) in member.bits.chars().enumerate() {
                        let cx = x + c * k as f64 + c / 2.0;
                        let (fill, class) = if bit == '1' { ("#222222", "cell-on") } else { ("none", "cell-off") };
                        writeln!(
                            body,
                            r##"<circle class="{class}" cx="{cx:.1}" cy="{:.1}" r="{:.1}" fill="{fill}" stroke="#222222" stroke-width="1"/>"##,
                            ry + half / 2.0,
                            half * 0.3
                        )
                        .unwrap();
                    }
                }
                max_rows = max_rows.max(block.members.len());
                x += w + style.block_gap;
            }
            let width = (x - style.block_gap + style.margin).max(360.0);
            (width, rows_y + c / 2.0 * max_rows as f64 + style.margin)
        }
    };
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.1}\" height=\"{height:.1}\" viewBox=\"0 0 {width:.1} {height:.1}\" font-family=\"sans-serif\">\n{body}</svg>\n"
    )
}

pub fn write_svg(report: &Report, style: &SvgStyle, path: &Path) -> Result<()> {
    write_atomic(path, render_svg(report, style).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_endpoints() {
        let s = SvgStyle::default();
        assert_eq!(s.ramp(0.0), "#f1f5fb");
        assert_eq!(s.ramp(1.0), "#084594");
        assert_eq!(s.ramp(2.0), s.ramp(1.0));
        assert_eq!(s.ramp(f64::NAN), s.ramp(0.0));
    }

    #[test]
    fn labels_are_escaped() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }
}
