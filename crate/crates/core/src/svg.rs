//! Line plots rendered to SVG strings.

use plotters::coord::Shift;
use plotters::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// One named polyline.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Series2 {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// A line plot; axes marked `log` use base-10 scaling and drop nonpositive values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Plot {
    /// File stem under `plots/`.
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series2>,
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

impl Plot {
    pub fn new(name: &str, title: &str, x_label: &str, y_label: &str) -> Self {
        Plot {
            name: name.into(),
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: false,
            log_y: false,
            series: Vec::new(),
        }
    }

    pub fn log_log(mut self) -> Self {
        self.log_x = true;
        self.log_y = true;
        self
    }

    pub fn log_y(mut self) -> Self {
        self.log_y = true;
        self
    }

    pub fn with_series(mut self, label: &str, points: Vec<(f64, f64)>) -> Self {
        self.series.push(Series2 { label: label.into(), points });
        self
    }

    fn kept(&self) -> Vec<(String, Vec<(f64, f64)>)> {
        self.series
            .iter()
            .map(|s| {
                let pts = s
                    .points
                    .iter()
                    .copied()
                    .filter(|&(x, y)| x.is_finite() && y.is_finite() && (!self.log_x || x > 0.0) && (!self.log_y || y > 0.0))
                    .collect();
                (s.label.clone(), pts)
            })
            .collect()
    }

    /// Renders the plot as a standalone SVG document.
    pub fn render(&self) -> Result<String> {
        let series = self.kept();
        let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
        let x = range(all.iter().map(|p| p.0), self.log_x);
        let y = range(all.iter().map(|p| p.1), self.log_y);
        let mut out = String::new();
        {
            let root = SVGBackend::with_string(&mut out, (720, 480)).into_drawing_area();
            root.fill(&WHITE).map_err(draw_err)?;
            match (self.log_x, self.log_y) {
                (false, false) => self.draw(&root, x.0..x.1, y.0..y.1, &series)?,
                (true, false) => self.draw(&root, (x.0..x.1).log_scale(), y.0..y.1, &series)?,
                (false, true) => self.draw(&root, x.0..x.1, (y.0..y.1).log_scale(), &series)?,
                (true, true) => self.draw(&root, (x.0..x.1).log_scale(), (y.0..y.1).log_scale(), &series)?,
            }
            root.present().map_err(draw_err)?;
        }
        Ok(out)
    }

    fn draw<X, Y>(&self, root: &DrawingArea<SVGBackend<'_>, Shift>, x: X, y: Y, series: &[(String, Vec<(f64, f64)>)]) -> Result<()>
    where
        X: plotters::coord::ranged1d::AsRangedCoord<Value = f64>,
        Y: plotters::coord::ranged1d::AsRangedCoord<Value = f64>,
        X::CoordDescType: plotters::coord::ranged1d::ValueFormatter<f64>,
        Y::CoordDescType: plotters::coord::ranged1d::ValueFormatter<f64>,
    {
        let mut chart = ChartBuilder::on(root)
            .caption(&self.title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(70)
            .build_cartesian_2d(x, y)
            .map_err(draw_err)?;
        chart
            .configure_mesh()
            .x_desc(self.x_label.as_str())
            .y_desc(self.y_label.as_str())
            .x_label_formatter(&|v| format!("{v:.1e}"))
            .y_label_formatter(&|v| format!("{v:.1e}"))
            .draw()
            .map_err(draw_err)?;
        for (i, (label, pts)) in series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            chart
                .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
                .map_err(draw_err)?
                .label(label.as_str())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
            chart.draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled()))).map_err(draw_err)?;
        }
        if !series.is_empty() {
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(draw_err)?;
        }
        Ok(())
    }
}

fn draw_err<E: std::fmt::Debug>(e: E) -> Error {
    Error::Evaluation(format!("plot rendering failed: {e:?}"))
}

/// Padded data range; a degenerate range is widened around its value.
fn range(values: impl Iterator<Item = f64>, log: bool) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return if log { (0.1, 10.0) } else { (0.0, 1.0) };
    }
    if log {
        let (l, h) = (lo.log10(), hi.log10());
        let pad = ((h - l) * 0.05).max(0.25);
        (10f64.powf(l - pad), 10f64.powf(h + pad))
    } else {
        let pad = ((hi - lo) * 0.05).max(1e-12 * (1.0 + lo.abs().max(hi.abs())));
        (lo - pad, hi + pad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_log_and_linear_plots() {
        let p = Plot::new("r", "residual", "h", "r").log_log().with_series("N=256", vec![(1e-2, 3e-9), (1e-3, 3e-11), (0.0, 1.0)]);
        let svg = p.render().unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("N=256") && svg.contains("polyline"));
        let flat = Plot::new("f", "flat", "x", "y").with_series("c", vec![(0.0, 1.0), (1.0, 1.0)]).render().unwrap();
        assert!(flat.contains("</svg>"));
        assert!(Plot::new("e", "empty", "x", "y").render().unwrap().contains("</svg>"));
    }
}
