//! Portable image output: binary PGM rasters and a small SVG 1.1
//! subset limited to `rect`, `circle`, `polyline`, `text`, and
//! `line` elements.
//!
//! Spectrograms are drawn in grayscale with power expressed in
//! decibels relative to the loudest bin and clipped at a
//! configurable floor. Event overlays, scatter plots, ROC curves,
//! and density heatmaps are emitted as standalone SVG documents.
//! Every renderer is a pure function: equal inputs produce
//! byte-identical output.

use std::fmt::Write as _;

use thiserror::Error;

use crate::detect::SoundEvent;
use crate::dsp::Spectrogram;
use crate::eval::RocPoint;
use crate::spatial::{DensityGrid, RecorderSite};

/// Smallest accepted raster edge, in pixels.
pub const MIN_DIMENSION_PX: usize = 16;

/// Default dynamic-range floor for spectrogram display, in dB
/// relative to the loudest bin.
pub const DEFAULT_DB_FLOOR: f64 = -80.0;

/// Tolerance when checking that an event lies inside the rendered
/// time span.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("spectrogram has no frames to draw")]
    EmptySpectrogram,
    #[error(
        "event [{start_s:.3}, {end_s:.3}] s lies outside the rendered span [{span_start_s:.3}, {span_end_s:.3}] s"
    )]
    EventOutOfRange {
        start_s: f64,
        end_s: f64,
        span_start_s: f64,
        span_end_s: f64,
    },
    #[error("nothing to draw")]
    EmptyInput,
    #[error("image of {width_px}x{height_px} px is below the 16 px minimum edge")]
    ImageTooSmall { width_px: usize, height_px: usize },
}

/// Raster container emitted by [`render_spectrogram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Svg,
}

/// Output geometry and dynamic range for spectrogram images.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSpec {
    pub width_px: usize,
    pub height_px: usize,
    /// Quietest displayed level in dB relative to the loudest bin;
    /// anything below is clipped to black. Must be finite and
    /// negative.
    pub db_floor: f64,
    pub format: ImageFormat,
}

impl Default for ImageSpec {
    fn default() -> Self {
        ImageSpec {
            width_px: 640,
            height_px: 480,
            db_floor: DEFAULT_DB_FLOOR,
            format: ImageFormat::Pgm,
        }
    }
}

impl ImageSpec {
    pub fn check(&self) -> Result<(), RenderError> {
        if self.width_px < MIN_DIMENSION_PX || self.height_px < MIN_DIMENSION_PX {
            return Err(RenderError::ImageTooSmall {
                width_px: self.width_px,
                height_px: self.height_px,
            });
        }
        assert!(
            self.db_floor.is_finite() && self.db_floor < 0.0,
            "db_floor must be a finite negative dB value"
        );
        Ok(())
    }
}

/// Maps a dB value in `[floor, 0]` onto `0..=255`, clipping outside
/// the range.
fn db_to_gray(db: f64, floor: f64) -> u8 {
    let clamped = db.clamp(floor, 0.0);
    ((clamped - floor) / -floor * 255.0).round() as u8
}

/// Grayscale pixel rows (top row first) for a spectrogram resampled
/// to the requested size with nearest-neighbor lookup. Time runs
/// left to right, frequency bottom to top.
fn spectrogram_gray(spec: &Spectrogram, img: &ImageSpec) -> Result<Vec<Vec<u8>>, RenderError> {
    img.check()?;
    if spec.n_frames() == 0 || spec.n_bins() == 0 {
        return Err(RenderError::EmptySpectrogram);
    }
    let (w, h) = (img.width_px, img.height_px);
    let n_frames = spec.n_frames();
    let n_bins = spec.n_bins();
    let peak = spec.power.iter().flatten().cloned().fold(0.0_f64, f64::max);
    let mut rows = vec![vec![0_u8; w]; h];
    if peak <= 0.0 {
        return Ok(rows);
    }
    for (y, row) in rows.iter_mut().enumerate() {
        let bin = n_bins - 1 - y * n_bins / h;
        for (x, px) in row.iter_mut().enumerate() {
            let frame = x * n_frames / w;
            let db = 10.0 * (spec.power[frame][bin] / peak).log10();
            *px = db_to_gray(db, img.db_floor);
        }
    }
    Ok(rows)
}

fn encode_pgm(rows: &[Vec<u8>]) -> Vec<u8> {
    let h = rows.len();
    let w = rows.first().map_or(0, Vec::len);
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    for row in rows {
        out.extend_from_slice(row);
    }
    out
}

fn svg_header(w: usize, h: usize) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    )
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Draws a grayscale raster as one vertical line per run of equal
/// pixels in each column, keeping the SVG within the supported
/// element subset.
#[allow(clippy::needless_range_loop)]
fn push_gray_columns(svg: &mut String, rows: &[Vec<u8>]) {
    let h = rows.len();
    let w = rows.first().map_or(0, Vec::len);
    for x in 0..w {
        let cx = x as f64 + 0.5;
        let mut y = 0;
        while y < h {
            let g = rows[y][x];
            let mut end = y + 1;
            while end < h && rows[end][x] == g {
                end += 1;
            }
            let _ = writeln!(
                svg,
                "<line x1=\"{cx:.1}\" y1=\"{y}\" x2=\"{cx:.1}\" y2=\"{end}\" stroke=\"rgb({g},{g},{g})\" stroke-width=\"1\"/>"
            );
            y = end;
        }
    }
}

/// Renders a spectrogram to PGM or SVG bytes per `img.format`.
///
/// Power is converted to dB relative to the loudest bin, clipped at
/// `img.db_floor`, and mapped linearly onto 0..=255. An all-zero
/// spectrogram renders uniformly at the floor value.
pub fn render_spectrogram(spec: &Spectrogram, img: &ImageSpec) -> Result<Vec<u8>, RenderError> {
    let rows = spectrogram_gray(spec, img)?;
    match img.format {
        ImageFormat::Pgm => Ok(encode_pgm(&rows)),
        ImageFormat::Svg => {
            let mut svg = svg_header(img.width_px, img.height_px);
            push_gray_columns(&mut svg, &rows);
            svg.push_str("</svg>\n");
            Ok(svg.into_bytes())
        }
    }
}

/// Renders a spectrogram with one rectangle per detected event
/// spanning `[start_s, end_s]` by the detection band `band_hz`, and
/// the event probability (when present) printed above the box with
/// two decimals. Always SVG.
pub fn render_events_overlay(
    spec: &Spectrogram,
    events: &[SoundEvent],
    band_hz: (f64, f64),
    img: &ImageSpec,
) -> Result<Vec<u8>, RenderError> {
    let rows = spectrogram_gray(spec, img)?;
    let t0 = spec.frame_start_s(0);
    let span = spec.span_s();
    for e in events {
        if e.start_s < t0 - TIME_EPS || e.end_s > t0 + span + TIME_EPS {
            return Err(RenderError::EventOutOfRange {
                start_s: e.start_s,
                end_s: e.end_s,
                span_start_s: t0,
                span_end_s: t0 + span,
            });
        }
    }
    let (w, h) = (img.width_px as f64, img.height_px as f64);
    let f_top = spec.n_bins() as f64 * spec.bin_hz;
    let x_of = |t: f64| ((t - t0) / span * w).clamp(0.0, w);
    let y_of = |f: f64| ((1.0 - f / f_top) * h).clamp(0.0, h);
    let mut svg = svg_header(img.width_px, img.height_px);
    push_gray_columns(&mut svg, &rows);
    for e in events {
        let x = x_of(e.start_s);
        let rw = (x_of(e.end_s) - x).max(1.0);
        let y = y_of(band_hz.1.min(f_top));
        let rh = (y_of(band_hz.0.max(0.0)) - y).max(1.0);
        let _ = writeln!(
            svg,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{rw:.2}\" height=\"{rh:.2}\" fill=\"none\" stroke=\"white\" stroke-width=\"1.5\"/>"
        );
        if let Some(p) = e.probability {
            let ty = (y - 3.0).max(10.0);
            let _ = writeln!(
                svg,
                "<text x=\"{x:.2}\" y=\"{ty:.2}\" font-size=\"10\" fill=\"white\">{p:.2}</text>"
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg.into_bytes())
}

/// One 2-D point in a classification biplot.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub class: String,
}

/// Data range padded by 5% on each side; a degenerate range expands
/// to a unit box so the pixel mapping never divides by zero.
fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Writes one data marker; the shape cycles with the class index so
/// classes stay distinguishable in grayscale. Every marker is a
/// single element carrying `class="{role}"`.
fn push_marker(svg: &mut String, shape: usize, x: f64, y: f64, role: &str) {
    match shape % 4 {
        0 => {
            let _ = writeln!(
                svg,
                "<circle class=\"{role}\" cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3.5\" fill=\"black\"/>"
            );
        }
        1 => {
            let _ = writeln!(
                svg,
                "<rect class=\"{role}\" x=\"{:.2}\" y=\"{:.2}\" width=\"6\" height=\"6\" fill=\"none\" stroke=\"black\"/>",
                x - 3.0,
                y - 3.0
            );
        }
        2 => {
            let _ = writeln!(
                svg,
                "<polyline class=\"{role}\" points=\"{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}\" fill=\"black\"/>",
                x, y - 4.0, x - 3.5, y + 3.0, x + 3.5, y + 3.0, x, y - 4.0
            );
        }
        _ => {
            let _ = writeln!(
                svg,
                "<polyline class=\"{role}\" points=\"{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}\" fill=\"none\" stroke=\"black\"/>",
                x, y - 4.0, x + 4.0, y, x, y + 4.0, x - 4.0, y, x, y - 4.0
            );
        }
    }
}

/// Renders a biplot on a 640x480 canvas: one marker per point with
/// the shape keyed by class, a legend listing every class, and axes
/// spanning the data range with a 5% margin.
pub fn render_scatter(
    points: &[ScatterPoint],
    x_label: &str,
    y_label: &str,
) -> Result<Vec<u8>, RenderError> {
    if points.is_empty() {
        return Err(RenderError::EmptyInput);
    }
    let (w, h) = (640.0, 480.0);
    let (left, right, top, bottom) = (60.0, w - 150.0, 20.0, h - 50.0);
    let (x_lo, x_hi) = padded_range(points.iter().map(|p| p.x));
    let (y_lo, y_hi) = padded_range(points.iter().map(|p| p.y));
    let px = |x: f64| left + (x - x_lo) / (x_hi - x_lo) * (right - left);
    let py = |y: f64| bottom - (y - y_lo) / (y_hi - y_lo) * (bottom - top);
    let mut classes: Vec<&str> = points.iter().map(|p| p.class.as_str()).collect();
    classes.sort_unstable();
    classes.dedup();

    let mut svg = svg_header(640, 480);
    let _ = writeln!(
        svg,
        "<line x1=\"{left:.2}\" y1=\"{bottom:.2}\" x2=\"{right:.2}\" y2=\"{bottom:.2}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{left:.2}\" y1=\"{top:.2}\" x2=\"{left:.2}\" y2=\"{bottom:.2}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        (left + right) / 2.0,
        h - 12.0,
        xml_escape(x_label)
    );
    let _ = writeln!(
        svg,
        "<text x=\"10\" y=\"14\" font-size=\"12\">{}</text>",
        xml_escape(y_label)
    );
    let _ = writeln!(
        svg,
        "<text x=\"{left:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\">{x_lo:.2}</text>",
        bottom + 16.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"{right:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\">{x_hi:.2}</text>",
        bottom + 16.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{bottom:.2}\" font-size=\"10\" text-anchor=\"end\">{y_lo:.2}</text>",
        left - 6.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"end\">{y_hi:.2}</text>",
        left - 6.0,
        top + 8.0
    );
    for p in points {
        let shape = classes.binary_search(&p.class.as_str()).expect("class present");
        push_marker(&mut svg, shape, px(p.x), py(p.y), "pt");
    }
    for (i, class) in classes.iter().enumerate() {
        let ly = top + 12.0 + i as f64 * 20.0;
        push_marker(&mut svg, i, right + 20.0, ly, "legend-pt");
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{}</text>",
            right + 30.0,
            ly + 4.0,
            xml_escape(class)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg.into_bytes())
}

/// Renders an ROC curve on a 480x480 canvas: a polyline through
/// `(fpr, tpr)` in threshold order plus the chance diagonal.
pub fn render_roc(points: &[RocPoint]) -> Result<Vec<u8>, RenderError> {
    if points.is_empty() {
        return Err(RenderError::EmptyInput);
    }
    let mut sorted: Vec<&RocPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.threshold.total_cmp(&b.threshold));
    let (left, top, side) = (50.0, 20.0, 380.0);
    let px = |f: f64| left + f * side;
    let py = |t: f64| top + (1.0 - t) * side;

    let mut svg = svg_header(480, 480);
    let _ = writeln!(
        svg,
        "<line x1=\"{left:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
        top + side,
        left + side,
        top + side
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{left:.2}\" y1=\"{top:.2}\" x2=\"{left:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
        top + side
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>",
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    let pts: Vec<String> = sorted
        .iter()
        .map(|p| format!("{:.2},{:.2}", px(p.fpr), py(p.tpr)))
        .collect();
    let _ = writeln!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>",
        pts.join(" ")
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">false positive rate</text>",
        left + side / 2.0,
        top + side + 35.0
    );
    let _ = writeln!(svg, "<text x=\"10\" y=\"14\" font-size=\"12\">true positive rate</text>");
    let _ = writeln!(
        svg,
        "<text x=\"{left:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\">0</text>",
        top + side + 14.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\">1</text>",
        left + side,
        top + side + 14.0
    );
    svg.push_str("</svg>\n");
    Ok(svg.into_bytes())
}

/// Renders a call-density surface on a 500x470 canvas: one grayscale
/// rectangle per grid cell (minimum maps to black, maximum to white,
/// a constant grid to mid-gray) with one circle marker per recorder
/// site.
pub fn render_heatmap(grid: &DensityGrid, sites: &[RecorderSite]) -> Result<Vec<u8>, RenderError> {
    grid.spec.check();
    if grid.values.len() != grid.spec.ny
        || grid.values.iter().any(|row| row.len() != grid.spec.nx)
    {
        return Err(RenderError::EmptyInput);
    }
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    let (left, top, plot_w, plot_h) = (50.0, 20.0, 400.0, 400.0);
    let (min_v, max_v) = (grid.min_value(), grid.max_value());
    let gray = |v: f64| -> u8 {
        if max_v > min_v {
            ((v - min_v) / (max_v - min_v) * 255.0).round() as u8
        } else {
            128
        }
    };
    let cell_w = plot_w / nx as f64;
    let cell_h = plot_h / ny as f64;

    let mut svg = svg_header(500, 470);
    for iy in 0..ny {
        for ix in 0..nx {
            let g = gray(grid.values[iy][ix]);
            let x = left + ix as f64 * cell_w;
            let y = top + (ny - 1 - iy) as f64 * cell_h;
            let _ = writeln!(
                svg,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{cell_w:.2}\" height=\"{cell_h:.2}\" fill=\"rgb({g},{g},{g})\"/>"
            );
        }
    }
    let cell = grid.spec.cell_m;
    let wx0 = grid.spec.x0_m - cell / 2.0;
    let wy0 = grid.spec.y0_m - cell / 2.0;
    let sx = |x: f64| left + (x - wx0) / (nx as f64 * cell) * plot_w;
    let sy = |y: f64| top + plot_h - (y - wy0) / (ny as f64 * cell) * plot_h;
    for site in sites {
        let _ = writeln!(
            svg,
            "<circle class=\"site\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>",
            sx(site.x_m),
            sy(site.y_m)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg.into_bytes())
}
