//! Biplot: factor scores as points, dimensionless loadings as arrows.
//!
//! Arrow coordinates are `c * w_hat_j` (or `c * g_hat_j`) restricted to the
//! two plotted axes, so no arrow is longer than `c`, the radius of the dashed
//! circle. With automatic scaling the arrows and circle are stretched so the
//! circle matches the 95th percentile of the score radii.

use std::fmt::Write as _;
use std::io::Write;

use crate::canon::CanonicalModel;
use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::io::format_f64;
use crate::model::{factor_scores, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArrowScale {
    #[default]
    Auto,
    Real,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiplotSpec {
    /// Zero-based latent indices for the horizontal and vertical axes.
    pub axes: (usize, usize),
    /// Continuous column used for the blue-to-red colour ramp.
    pub color_by: Option<String>,
    pub arrow_scale: ArrowScale,
}

impl Default for BiplotSpec {
    fn default() -> Self {
        BiplotSpec {
            axes: (0, 1),
            color_by: None,
            arrow_scale: ArrowScale::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arrow {
    pub name: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone)]
pub struct Biplot {
    pub axes: (usize, usize),
    /// Contribution ratios of the two axes.
    pub ratios: (f64, f64),
    pub points: Vec<(f64, f64)>,
    /// Per-point colour values; `None` entries are missing cells.
    pub color: Option<(String, Vec<Option<f64>>)>,
    /// Unscaled arrow tips.
    pub arrows: Vec<Arrow>,
    /// Maximum possible arrow length, `c`.
    pub radius: f64,
    /// Display factor applied to arrows and circle.
    pub scale: f64,
}

/// Linear-interpolation percentile of unsorted values, `q` in `[0, 1]`.
fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn build_biplot(canon: &CanonicalModel, data: &Dataset, spec: &BiplotSpec) -> Result<Biplot> {
    let params = &canon.params;
    let p_z = params.p_z();
    let (a, b) = spec.axes;
    if a >= p_z || b >= p_z || a == b {
        return Err(Error::InvalidInput(format!(
            "axes must be two distinct indices in 1..={p_z}, got {},{}",
            a + 1,
            b + 1
        )));
    }
    let color = match &spec.color_by {
        None => None,
        Some(name) => {
            let col = data
                .schema
                .columns()
                .iter()
                .find(|c| &c.name == name)
                .ok_or_else(|| Error::Schema(format!("unknown colour column '{name}'")))?;
            if col.kind != ColumnKind::Continuous {
                return Err(Error::Schema(format!("colour column '{name}' is not continuous")));
            }
            let j = data.schema.continuous_names().iter().position(|n| n == name).expect("continuous column");
            Some((name.clone(), data.rows.iter().map(|r| r.x[j]).collect()))
        }
    };

    let model = Model::new(params.clone())?;
    let points: Vec<(f64, f64)> = factor_scores(&model, data)?
        .into_iter()
        .map(|s| (s.m[a], s.m[b]))
        .collect();

    let m_hat = params.m_hat();
    let arrows = data
        .schema
        .internal_names()
        .into_iter()
        .enumerate()
        .map(|(j, name)| Arrow {
            name: name.to_string(),
            x: params.c * m_hat[(j, a)],
            y: params.c * m_hat[(j, b)],
        })
        .collect();

    let scale = match spec.arrow_scale {
        ArrowScale::Real => 1.0,
        ArrowScale::Auto => {
            let radii: Vec<f64> = points.iter().map(|(x, y)| x.hypot(*y)).collect();
            let r95 = percentile(&radii, 0.95);
            if params.c > 0.0 && r95 > 0.0 {
                r95 / params.c
            } else {
                1.0
            }
        }
    };

    Ok(Biplot {
        axes: (a, b),
        ratios: (canon.p[a], canon.p[b]),
        points,
        color,
        arrows,
        radius: params.c,
        scale,
    })
}

impl Biplot {
    pub fn axis_labels(&self) -> (String, String) {
        let label = |k: usize, p: f64| format!("z_{} ({:.1}%)", k + 1, 100.0 * p);
        (label(self.axes.0, self.ratios.0), label(self.axes.1, self.ratios.1))
    }

    /// CSV with columns `kind,name,x,y,value`:
    /// `axis` rows (label, axis number, contribution ratio),
    /// one `circle` row (radius `c`, display scale),
    /// `score` rows (1-based row, coordinates, colour value) and
    /// `arrow` rows (column name, unscaled tip).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["kind", "name", "x", "y", "value"])?;
        let (lx, ly) = self.axis_labels();
        for (label, k, p) in [(lx, self.axes.0, self.ratios.0), (ly, self.axes.1, self.ratios.1)] {
            w.write_record(["axis", &label, &(k + 1).to_string(), &format_f64(p), ""])?;
        }
        w.write_record(["circle", "radius", &format_f64(self.radius), &format_f64(self.scale), ""])?;
        for (i, (x, y)) in self.points.iter().enumerate() {
            let value = self
                .color
                .as_ref()
                .and_then(|(_, v)| v[i])
                .map(format_f64)
                .unwrap_or_default();
            w.write_record(["score", &(i + 1).to_string(), &format_f64(*x), &format_f64(*y), &value])?;
        }
        for a in &self.arrows {
            w.write_record(["arrow", &a.name, &format_f64(a.x), &format_f64(a.y), ""])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_svg(&self) -> String {
        const SIZE: f64 = 640.0;
        const MARGIN: f64 = 60.0;
        let mut extent = self.radius * self.scale;
        for (x, y) in &self.points {
            extent = extent.max(x.abs()).max(y.abs());
        }
        if !(extent > 0.0) {
            extent = 1.0;
        }
        extent *= 1.05;
        let half = (SIZE - 2.0 * MARGIN) / 2.0;
        let centre = SIZE / 2.0;
        let px = |x: f64| centre + x / extent * half;
        let py = |y: f64| centre - y / extent * half;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
        );
        s.push_str(
            "<defs><marker id=\"head\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" markerWidth=\"6\" \
             markerHeight=\"6\" orient=\"auto-start-reverse\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"#333\"/></marker></defs>\n",
        );
        s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        let (lo, hi) = (MARGIN, SIZE - MARGIN);
        let _ = writeln!(
            s,
            "<g stroke=\"#bbb\" stroke-width=\"1\"><line x1=\"{lo}\" y1=\"{centre}\" x2=\"{hi}\" y2=\"{centre}\"/>\
             <line x1=\"{centre}\" y1=\"{lo}\" x2=\"{centre}\" y2=\"{hi}\"/></g>"
        );
        let r_px = self.radius * self.scale / extent * half;
        let _ = writeln!(
            s,
            "<circle cx=\"{centre}\" cy=\"{centre}\" r=\"{r_px:.3}\" fill=\"none\" stroke=\"#666\" stroke-dasharray=\"6,4\"/>"
        );

        let range = self.color.as_ref().map(|(_, v)| {
            v.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
        });
        s.push_str("<g stroke=\"none\" fill-opacity=\"0.7\">\n");
        for (i, (x, y)) in self.points.iter().enumerate() {
            let fill = match (&self.color, range) {
                (Some((_, v)), Some((min, max))) => match v[i] {
                    Some(val) => {
                        let t = if max > min { (val - min) / (max - min) } else { 0.5 };
                        ramp(t)
                    }
                    None => "#999999".to_string(),
                },
                _ => "#4a6fa5".to_string(),
            };
            let _ = writeln!(s, "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"2.5\" fill=\"{fill}\"/>", px(*x), py(*y));
        }
        s.push_str("</g>\n<g stroke=\"#333\" stroke-width=\"1.5\" font-family=\"sans-serif\" font-size=\"12\">\n");
        for a in &self.arrows {
            let (tx, ty) = (px(a.x * self.scale), py(a.y * self.scale));
            let _ = writeln!(
                s,
                "<line x1=\"{centre}\" y1=\"{centre}\" x2=\"{tx:.3}\" y2=\"{ty:.3}\" marker-end=\"url(#head)\"/>\
                 <text x=\"{:.3}\" y=\"{:.3}\" stroke=\"none\" fill=\"#111\">{}</text>",
                tx + 4.0,
                ty - 4.0,
                escape(&a.name)
            );
        }
        s.push_str("</g>\n");
        let (lx, ly) = self.axis_labels();
        let _ = writeln!(
            s,
            "<text x=\"{centre}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>",
            SIZE - MARGIN / 3.0,
            escape(&lx)
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{centre}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" \
             transform=\"rotate(-90 {:.1} {centre})\">{}</text>",
            MARGIN / 2.0,
            MARGIN / 2.0,
            escape(&ly)
        );
        if let Some((name, _)) = &self.color {
            let _ = writeln!(
                s,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">colour: {} (blue low, red high)</text>",
                SIZE - 10.0,
                MARGIN / 2.0,
                escape(name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(33.0, 178.0), lerp(102.0, 24.0), lerp(172.0, 43.0))
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::canonicalize;
    use crate::random_model::random_params;
    use crate::sample::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(p_z: usize) -> (CanonicalModel, Dataset) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_params(&mut rng, 3, 3, p_z);
        let canon = canonicalize(&p).unwrap();
        let d = sample(&canon.params, 200, 5).unwrap();
        (canon, d)
    }

    #[test]
    fn arrows_are_projected_rows_and_fit_in_circle() {
        let (canon, d) = setup(3);
        let spec = BiplotSpec {
            axes: (0, 2),
            ..Default::default()
        };
        let bp = build_biplot(&canon, &d, &spec).unwrap();
        let m = canon.params.m_hat();
        for (j, a) in bp.arrows.iter().enumerate() {
            assert!((a.x - canon.params.c * m[(j, 0)]).abs() <= 1e-12);
            assert!((a.y - canon.params.c * m[(j, 2)]).abs() <= 1e-12);
            assert!(a.x.hypot(a.y) <= bp.radius * (1.0 + 1e-12));
        }
        assert_eq!(bp.points.len(), d.len());
    }

    #[test]
    fn in_plane_arrow_reaches_circle() {
        let (canon, d) = setup(2);
        let bp = build_biplot(&canon, &d, &BiplotSpec::default()).unwrap();
        for a in &bp.arrows {
            assert!((a.x.hypot(a.y) - bp.radius).abs() <= 1e-12 * bp.radius.max(1.0));
        }
    }

    #[test]
    fn labels_carry_contribution_ratios() {
        let (canon, d) = setup(2);
        let bp = build_biplot(&canon, &d, &BiplotSpec::default()).unwrap();
        let (lx, ly) = bp.axis_labels();
        assert_eq!(lx, format!("z_1 ({:.1}%)", 100.0 * canon.p[0]));
        assert_eq!(ly, format!("z_2 ({:.1}%)", 100.0 * canon.p[1]));
    }

    #[test]
    fn auto_scale_matches_score_percentile() {
        let (canon, d) = setup(2);
        let bp = build_biplot(&canon, &d, &BiplotSpec::default()).unwrap();
        let radii: Vec<f64> = bp.points.iter().map(|(x, y)| x.hypot(*y)).collect();
        let below = radii.iter().filter(|&&r| r <= bp.radius * bp.scale + 1e-12).count();
        assert!((below as f64 / radii.len() as f64 - 0.95).abs() <= 0.01);
        let real = BiplotSpec {
            arrow_scale: ArrowScale::Real,
            ..Default::default()
        };
        assert_eq!(build_biplot(&canon, &d, &real).unwrap().scale, 1.0);
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[3.0, 1.0, 2.0, 4.0, 5.0], 0.5), 3.0);
        assert!((percentile(&[0.0, 10.0], 0.95) - 9.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_axes_and_colour() {
        let (canon, d) = setup(2);
        for axes in [(0, 0), (0, 2), (5, 1)] {
            let spec = BiplotSpec {
                axes,
                ..Default::default()
            };
            assert!(build_biplot(&canon, &d, &spec).is_err());
        }
        let bad = BiplotSpec {
            color_by: Some("y1".into()),
            ..Default::default()
        };
        assert!(build_biplot(&canon, &d, &bad).is_err());
        let good = BiplotSpec {
            color_by: Some("x2".into()),
            ..Default::default()
        };
        let bp = build_biplot(&canon, &d, &good).unwrap();
        let svg = bp.to_svg();
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("z_1 ("));
        let mut buf = Vec::new();
        bp.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("score,")).count(), d.len());
        assert_eq!(text.lines().filter(|l| l.starts_with("arrow,")).count(), 6);
    }
}
