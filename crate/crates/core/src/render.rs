//! Pixel-grid classification, Julia-boundary samples, colouring, annulus
//! overlays and P6 output.
//!
//! Each pixel is sampled at its centre. Rows run top to bottom, so row 0 is
//! the largest imaginary part.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{classify, itinerary_class, ItineraryClass, Status, DEFAULT_TAIL_MARGIN};
use crate::geometry::{annulus_a, branch_count_log2, pull_back_annulus, radii, BranchCode, GeometryError, PulledBackAnnulus};
use crate::params::ParameterSequence;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("invalid render configuration: {0}")]
    Config(String),
    #[error("invalid overlay {spec:?}: {reason}")]
    Overlay { spec: String, reason: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Axis-aligned rectangle in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: Complex64,
    pub width: f64,
    pub height: f64,
}

impl Window {
    pub fn new(center: Complex64, width: f64, height: f64) -> Self {
        Window { center, width, height }
    }

    pub fn square(center: Complex64, side: f64) -> Self {
        Window::new(center, side, side)
    }

    /// Centre of pixel `(x, y)` on a `w` by `h` grid.
    pub fn pixel_center(&self, x: usize, y: usize, w: usize, h: usize) -> Complex64 {
        Complex64::new(
            self.center.re - 0.5 * self.width + (x as f64 + 0.5) * self.width / w as f64,
            self.center.im + 0.5 * self.height - (y as f64 + 0.5) * self.height / h as f64,
        )
    }

    /// Continuous pixel coordinates of `z`; pixel centres sit at half-integers.
    pub fn to_pixel(&self, z: Complex64, w: usize, h: usize) -> (f64, f64) {
        (
            (z.re - (self.center.re - 0.5 * self.width)) * w as f64 / self.width,
            ((self.center.im + 0.5 * self.height) - z.im) * h as f64 / self.height,
        )
    }
}

/// Square window around 0 covering the survival set at time `m`.
///
/// The survival set at time `M_k - 1` lies in the two disks of radius `r_k`
/// about `+-sqrt(-b_k)`; earlier times see its preimage under the squaring
/// maps in between.
pub fn default_window(seq: &ParameterSequence, m: u64) -> Window {
    let k = seq.first_stage_from(m);
    if k > seq.depth() {
        return Window::square(Complex64::new(0.0, 0.0), 4.4);
    }
    let r = radii(seq.b(k)).map(|r| r.r).unwrap_or(0.5);
    let reach = 2.0 * seq.root_b(k) + r;
    let steps = seq.checkpoint(k) - 1 - m;
    let radius = if steps >= 64 { 1.0 } else { reach.powf((-(steps as f64)).exp2()) };
    Window::square(Complex64::new(0.0, 0.0), 2.2 * radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Palette {
    #[default]
    Classic,
    Gray,
}

impl FromStr for Palette {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classic" => Ok(Palette::Classic),
            "gray" | "grey" => Ok(Palette::Gray),
            other => Err(format!("unknown palette {other:?}; expected classic or gray")),
        }
    }
}

/// Which annuli to draw over a render at time `m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum OverlaySpec {
    /// `A:k`, the round annulus `A_k`; needs `m = M_k - 1`.
    Round { stage: usize },
    /// `B:k:CODE`, one pull-back of `A_k` to time `m`.
    Branch { stage: usize, code: BranchCode },
    /// `B:k:*`, every pull-back of `A_k` to time `m`.
    AllBranches { stage: usize },
}

impl FromStr for OverlaySpec {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| RenderError::Overlay {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let parts: Vec<&str> = s.split(':').collect();
        let stage = |p: &str| p.parse::<usize>().map_err(|_| bad("stage must be a positive integer"));
        match parts.as_slice() {
            ["A", k] => Ok(OverlaySpec::Round { stage: stage(k)? }),
            ["B", k, "*"] => Ok(OverlaySpec::AllBranches { stage: stage(k)? }),
            ["B", k, code] => Ok(OverlaySpec::Branch {
                stage: stage(k)?,
                code: code.parse().map_err(|e: String| bad(&e))?,
            }),
            _ => Err(bad("expected A:k, B:k:CODE or B:k:*")),
        }
    }
}

impl fmt::Display for OverlaySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OverlaySpec::Round { stage } => write!(f, "A:{stage}"),
            OverlaySpec::Branch { stage, code } => write!(f, "B:{stage}:{code}"),
            OverlaySpec::AllBranches { stage } => write!(f, "B:{stage}:*"),
        }
    }
}

/// Most branches `B:k:*` may expand to.
pub const MAX_OVERLAY_BRANCHES: u64 = 1 << 12;

/// Computes the annuli named by `specs` at time `m`, in spec order.
pub fn resolve_overlays(
    seq: &ParameterSequence,
    m: u64,
    specs: &[OverlaySpec],
) -> Result<Vec<PulledBackAnnulus>, RenderError> {
    let mut out = Vec::new();
    for spec in specs {
        let bad = |reason: String| RenderError::Overlay {
            spec: spec.to_string(),
            reason,
        };
        match spec {
            OverlaySpec::Round { stage } => {
                seq.check_stage(*stage).map_err(|e| bad(e.to_string()))?;
                let time = seq.checkpoint(*stage) - 1;
                if m != time {
                    return Err(bad(format!(
                        "A_{stage} lives at time {time}, the render is at time {m}; use B:{stage}:CODE"
                    )));
                }
                out.push(pull_back_annulus(seq, m, *stage, &BranchCode::zeros(0))?);
            }
            OverlaySpec::Branch { stage, code } => {
                out.push(pull_back_annulus(seq, m, *stage, code).map_err(|e| bad(e.to_string()))?);
            }
            OverlaySpec::AllBranches { stage } => {
                let n = branch_count_log2(seq, m, *stage).map_err(|e| bad(e.to_string()))?;
                if n >= 63 || 1u64 << n > MAX_OVERLAY_BRANCHES {
                    return Err(bad(format!("2^{n} branches is too many to draw")));
                }
                let all: Result<Vec<_>, _> = (0..1u64 << n)
                    .into_par_iter()
                    .map(|j| pull_back_annulus(seq, m, *stage, &BranchCode::from_index(j, n as usize)))
                    .collect();
                out.extend(all?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub window: Window,
    pub width: usize,
    pub height: usize,
    pub time: u64,
    pub horizon: usize,
    pub tail_margin: usize,
    pub palette: Palette,
    pub overlays: Vec<OverlaySpec>,
}

impl RenderConfig {
    /// Square render of the default window at time `m` up to the last stage.
    pub fn for_time(seq: &ParameterSequence, m: u64, resolution: usize) -> Self {
        RenderConfig {
            window: default_window(seq, m),
            width: resolution,
            height: resolution,
            time: m,
            horizon: seq.depth(),
            tail_margin: DEFAULT_TAIL_MARGIN,
            palette: Palette::Classic,
            overlays: Vec::new(),
        }
    }

    pub fn validate(&self, seq: &ParameterSequence) -> Result<(), RenderError> {
        if self.width < 2 || self.height < 2 {
            return Err(RenderError::Config(format!(
                "resolution must be at least 2x2, got {}x{}",
                self.width, self.height
            )));
        }
        let w = &self.window;
        let finite = w.center.re.is_finite() && w.center.im.is_finite();
        if !(finite && w.width.is_finite() && w.height.is_finite() && w.width > 0.0 && w.height > 0.0) {
            return Err(RenderError::Config(format!(
                "window must have positive finite area, got {}x{}",
                w.width, w.height
            )));
        }
        if self.time > seq.final_time() {
            return Err(RenderError::Config(format!(
                "time {} is past the last checkpoint {}",
                self.time,
                seq.final_time()
            )));
        }
        if self.horizon == 0 || self.horizon > seq.depth() {
            return Err(RenderError::Config(format!(
                "horizon must be in 1..={}, got {}",
                seq.depth(),
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Compact per-pixel classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pixel {
    Escaped { stage: usize },
    /// `g_mask` bit `i` is set when stage `first_stage + i` was G.
    Survived { class: ItineraryClass, g_mask: u64 },
}

impl Pixel {
    pub fn survived(&self) -> bool {
        matches!(self, Pixel::Survived { .. })
    }

    pub fn escape_stage(&self) -> Option<usize> {
        match *self {
            Pixel::Escaped { stage } => Some(stage),
            Pixel::Survived { .. } => None,
        }
    }

    pub fn is_thick(&self) -> bool {
        matches!(self, Pixel::Survived { class, .. } if class.is_thick())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedGrid {
    pub window: Window,
    pub width: usize,
    pub height: usize,
    pub time: u64,
    pub horizon: usize,
    /// Stage of the first itinerary entry, shared by every pixel.
    pub first_stage: usize,
    pub pixels: Vec<Pixel>,
    /// Row-major indices of pixels whose side test disagreed with the disk test.
    pub anomalies: Vec<usize>,
}

impl ClassifiedGrid {
    pub fn get(&self, x: usize, y: usize) -> Pixel {
        self.pixels[y * self.width + x]
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.window
            .pixel_center(index % self.width, index / self.width, self.width, self.height)
    }

    /// Whether pixel `index` recorded G at stage `k`.
    pub fn g_at_stage(&self, index: usize, k: usize) -> bool {
        match self.pixels[index] {
            Pixel::Survived { g_mask, .. } => k
                .checked_sub(self.first_stage)
                .is_some_and(|i| i < 64 && g_mask >> i & 1 == 1),
            Pixel::Escaped { .. } => false,
        }
    }
}

pub fn classify_grid(seq: &ParameterSequence, cfg: &RenderConfig) -> Result<ClassifiedGrid, RenderError> {
    cfg.validate(seq)?;
    let (w, h) = (cfg.width, cfg.height);
    let cells: Vec<(Pixel, bool)> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let z = cfg.window.pixel_center(i % w, i / w, w, h);
            let cl = classify(seq, z, cfg.time, cfg.horizon);
            let pixel = match cl.status {
                Status::Escaped { stage, .. } => Pixel::Escaped { stage },
                Status::Survived { .. } => Pixel::Survived {
                    class: itinerary_class(&cl.itinerary, cfg.tail_margin),
                    g_mask: cl.itinerary.g_mask(),
                },
            };
            (pixel, cl.anomaly)
        })
        .collect();
    let anomalies = cells.iter().enumerate().filter(|(_, c)| c.1).map(|(i, _)| i).collect();
    Ok(ClassifiedGrid {
        window: cfg.window,
        width: w,
        height: h,
        time: cfg.time,
        horizon: cfg.horizon.min(seq.depth()),
        first_stage: seq.first_stage_from(cfg.time),
        pixels: cells.into_iter().map(|c| c.0).collect(),
        anomalies,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JuliaSample {
    pub index: usize,
    pub z: Complex64,
    /// Smallest escape stage among the escaped 4-neighbours.
    pub stage: usize,
}

/// Surviving pixels with at least one escaped 4-neighbour, in row-major order.
pub fn extract_julia_samples(grid: &ClassifiedGrid) -> Vec<JuliaSample> {
    let (w, h) = (grid.width, grid.height);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !grid.get(x, y).survived() {
                continue;
            }
            let neighbours = [
                (x > 0).then(|| (x - 1, y)),
                (x + 1 < w).then(|| (x + 1, y)),
                (y > 0).then(|| (x, y - 1)),
                (y + 1 < h).then(|| (x, y + 1)),
            ];
            let stage = neighbours
                .into_iter()
                .flatten()
                .filter_map(|(nx, ny)| grid.get(nx, ny).escape_stage())
                .min();
            if let Some(stage) = stage {
                let index = y * w + x;
                out.push(JuliaSample {
                    index,
                    z: grid.point(index),
                    stage,
                });
            }
        }
    }
    out
}

/// `re,im,stage`, one row per sample.
pub fn write_julia_csv<W: io::Write>(samples: &[JuliaSample], out: W) -> Result<(), RenderError> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["re", "im", "stage"])?;
    for s in samples {
        wtr.write_record([s.z.re.to_string(), s.z.im.to_string(), s.stage.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// 8-bit RGB raster, row-major, top row first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

pub type Rgb = [u8; 3];

impl Image {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Self {
        Image {
            width,
            height,
            data: fill.repeat(width * height),
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&c);
    }
}

const ANOMALY: Rgb = [255, 255, 255];
const ALL_H: Rgb = [245, 200, 60];
const JOINED: [Rgb; 6] = [
    [110, 205, 90],
    [60, 175, 150],
    [45, 140, 205],
    [120, 100, 210],
    [190, 120, 200],
    [200, 160, 120],
];
const THIN_LATE: Rgb = [215, 35, 55];
const THIN_OPEN: Rgb = [200, 60, 200];
/// Overlay stroke colour.
pub const OVERLAY: Rgb = [255, 255, 255];

fn lerp(a: Rgb, b: Rgb, f: f64) -> Rgb {
    let mix = |x: u8, y: u8| (x as f64 + (y as f64 - x as f64) * f).round() as u8;
    [mix(a[0], b[0]), mix(a[1], b[1]), mix(a[2], b[2])]
}

fn pixel_colour(pixel: Pixel, horizon: usize, palette: Palette) -> Rgb {
    match (palette, pixel) {
        (Palette::Classic, Pixel::Escaped { stage }) => {
            let f = stage as f64 / horizon.max(1) as f64;
            lerp([8, 12, 40], [150, 185, 235], f.min(1.0))
        }
        (Palette::Classic, Pixel::Survived { class, .. }) => match class {
            ItineraryClass::AllH => ALL_H,
            ItineraryClass::TailH { joining } => JOINED[joining.saturating_sub(1) % JOINED.len()],
            ItineraryClass::HitsGLate => THIN_LATE,
            ItineraryClass::Mixed => THIN_OPEN,
        },
        (Palette::Gray, Pixel::Escaped { stage }) => {
            let v = (30.0 + 150.0 * stage as f64 / horizon.max(1) as f64).round().min(180.0) as u8;
            [v, v, v]
        }
        (Palette::Gray, Pixel::Survived { class, .. }) => {
            if class.is_thick() {
                [255, 255, 255]
            } else {
                [0, 0, 0]
            }
        }
    }
}

/// Escape stages on a dark-to-light gradient, thick pixels by joining stage
/// (all-H in gold), thin pixels in red or magenta, anomalies in white.
pub fn colorize(grid: &ClassifiedGrid, palette: Palette) -> Image {
    let mut data: Vec<u8> = grid
        .pixels
        .par_iter()
        .flat_map_iter(|&p| pixel_colour(p, grid.horizon, palette))
        .collect();
    for &i in &grid.anomalies {
        data[3 * i..3 * i + 3].copy_from_slice(&ANOMALY);
    }
    Image {
        width: grid.width,
        height: grid.height,
        data,
    }
}

fn draw_segment(img: &mut Image, a: (f64, f64), b: (f64, f64), colour: Rgb) {
    let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil().max(1.0);
    if !steps.is_finite() || steps > 1e7 {
        return;
    }
    let n = steps as usize;
    for i in 0..=n {
        let f = i as f64 / steps;
        let x = (a.0 + (b.0 - a.0) * f).floor();
        let y = (a.1 + (b.1 - a.1) * f).floor();
        if x >= 0.0 && y >= 0.0 && (x as usize) < img.width && (y as usize) < img.height {
            img.set(x as usize, y as usize, colour);
        }
    }
}

/// Draws each curve as a closed polyline.
pub fn overlay_polylines(image: &Image, window: &Window, curves: &[&[Complex64]], colour: Rgb) -> Image {
    let mut out = image.clone();
    for curve in curves {
        let pts: Vec<(f64, f64)> = curve
            .iter()
            .map(|&z| window.to_pixel(z, image.width, image.height))
            .collect();
        for i in 0..pts.len() {
            draw_segment(&mut out, pts[i], pts[(i + 1) % pts.len()], colour);
        }
    }
    out
}

/// Draws both boundary curves of every annulus.
pub fn overlay_annuli(image: &Image, window: &Window, annuli: &[PulledBackAnnulus], colour: Rgb) -> Image {
    let curves: Vec<&[Complex64]> = annuli
        .iter()
        .flat_map(|a| [a.inner.as_slice(), a.outer.as_slice()])
        .collect();
    overlay_polylines(image, window, &curves, colour)
}

/// Binary PPM: `P6\n<w> <h>\n255\n` then RGB triples.
pub fn encode_ppm(image: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.data);
    out
}

pub fn write_image(image: &Image, path: &Path) -> Result<(), RenderError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_ppm(image))?;
    f.flush()?;
    Ok(())
}

/// Round annulus `A_k` for overlay at its own time `M_k - 1`.
pub fn round_annulus_overlay(seq: &ParameterSequence, k: usize) -> Result<PulledBackAnnulus, RenderError> {
    annulus_a(seq, k)?;
    Ok(pull_back_annulus(seq, seq.checkpoint(k) - 1, k, &BranchCode::zeros(0))?)
}

/// Pixel counts by kind.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridStats {
    pub total: usize,
    pub escaped: usize,
    pub thick: usize,
    pub thin: usize,
    pub anomalies: usize,
}

pub fn grid_stats(grid: &ClassifiedGrid) -> GridStats {
    let mut s = GridStats {
        total: grid.pixels.len(),
        anomalies: grid.anomalies.len(),
        ..GridStats::default()
    };
    for p in &grid.pixels {
        match p {
            Pixel::Escaped { .. } => s.escaped += 1,
            p if p.is_thick() => s.thick += 1,
            _ => s.thin += 1,
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::build_sequence;
    use crate::params::PlanPolicy;

    fn cfg(window: Window, n: usize, time: u64) -> RenderConfig {
        RenderConfig {
            window,
            width: n,
            height: n,
            time,
            horizon: 3,
            tail_margin: DEFAULT_TAIL_MARGIN,
            palette: Palette::Classic,
            overlays: vec![],
        }
    }

    fn origin() -> Complex64 {
        Complex64::new(0.0, 0.0)
    }

    #[test]
    fn pixel_centres() {
        let w = Window::square(origin(), 2.0);
        assert_eq!(w.pixel_center(0, 0, 2, 2), Complex64::new(-0.5, 0.5));
        assert_eq!(w.pixel_center(1, 1, 2, 2), Complex64::new(0.5, -0.5));
        let (x, y) = w.to_pixel(Complex64::new(0.5, -0.5), 2, 2);
        assert_eq!((x, y), (1.5, 1.5));
    }

    #[test]
    fn grid_examples() {
        let seq = ParameterSequence::default_demo();
        // width 5 on 5 pixels puts centres on the integers
        let grid = classify_grid(&seq, &cfg(Window::new(origin(), 5.0, 5.0), 5, 0)).unwrap();
        assert!(matches!(
            grid.get(2, 2),
            Pixel::Survived {
                class: ItineraryClass::AllH,
                g_mask: 0
            }
        ));
        assert_eq!(grid.point(2 * 5 + 2), origin());
        // z = 2 is the rightmost centre of the middle row; z = 3 needs a wider window
        let grid = classify_grid(&seq, &cfg(Window::new(origin(), 7.0, 7.0), 7, 0)).unwrap();
        assert_eq!(grid.point(3 * 7 + 6), Complex64::new(3.0, 0.0));
        assert_eq!(grid.get(6, 3), Pixel::Escaped { stage: 1 });
        assert!(grid.anomalies.is_empty());

        let tiny = classify_grid(&seq, &cfg(Window::square(origin(), 1.0), 2, 0)).unwrap();
        assert_eq!(tiny.pixels.len(), 4);
        assert_eq!(encode_ppm(&colorize(&tiny, Palette::Classic)).len(), 11 + 12);
    }

    #[test]
    fn config_validation() {
        let seq = ParameterSequence::default_demo();
        let mut c = cfg(Window::square(origin(), 1.0), 1, 0);
        assert!(matches!(classify_grid(&seq, &c), Err(RenderError::Config(_))));
        c.width = 4;
        c.height = 4;
        c.window.height = 0.0;
        assert!(matches!(classify_grid(&seq, &c), Err(RenderError::Config(_))));
        c.window.height = 1.0;
        c.time = seq.final_time() + 1;
        assert!(matches!(classify_grid(&seq, &c), Err(RenderError::Config(_))));
        c.time = seq.final_time();
        assert!(classify_grid(&seq, &c).is_ok());
    }

    #[test]
    fn interior_window_has_no_julia_samples() {
        let seq = ParameterSequence::default_demo();
        let grid = classify_grid(&seq, &cfg(Window::square(origin(), 0.5), 16, 0)).unwrap();
        assert!(grid.pixels.iter().all(|p| p.survived()));
        assert!(extract_julia_samples(&grid).is_empty());
    }

    #[test]
    fn julia_samples_sit_in_the_disks() {
        let seq = ParameterSequence::default_demo();
        let m = seq.checkpoint(1) - 1;
        let grid = classify_grid(&seq, &RenderConfig::for_time(&seq, m, 160)).unwrap();
        let samples = extract_julia_samples(&grid);
        assert!(!samples.is_empty());
        let r = radii(-7.0).unwrap().r;
        let c = 7f64.sqrt();
        for s in &samples {
            let d = (s.z - c).norm().min((s.z + c).norm());
            assert!(d <= r, "{:?} at distance {d}", s.z);
        }
    }

    #[test]
    fn colours() {
        let seq = ParameterSequence::default_demo();
        let grid = classify_grid(&seq, &cfg(Window::new(origin(), 5.0, 5.0), 5, 0)).unwrap();
        let img = colorize(&grid, Palette::Classic);
        assert_eq!(img.get(2, 2), ALL_H);
        assert_eq!(img.get(0, 0), pixel_colour(Pixel::Escaped { stage: 1 }, 3, Palette::Classic));
        assert_eq!(colorize(&grid, Palette::Classic), img);

        let far = classify_grid(&seq, &cfg(Window::square(Complex64::new(50.0, 50.0), 1.0), 3, 0)).unwrap();
        let img = colorize(&far, Palette::Classic);
        let c = img.get(0, 0);
        assert!(img.data.chunks(3).all(|p| p == c));
    }

    #[test]
    fn ppm_layout() {
        let mut img = Image::new(2, 2, [0, 0, 0]);
        img.set(1, 0, [1, 2, 3]);
        img.set(0, 1, [250, 251, 252]);
        let bytes = encode_ppm(&img);
        assert_eq!(&bytes[..11], b"P6\n2 2\n255\n");
        assert_eq!(&bytes[11..], &[0, 0, 0, 1, 2, 3, 250, 251, 252, 0, 0, 0]);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ppm");
        write_image(&img, &path).unwrap();
        write_image(&img, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), bytes);
        let missing = dir.path().join("no/such/dir/x.ppm");
        assert!(matches!(write_image(&img, &missing), Err(RenderError::Io(_))));
    }

    #[test]
    fn overlays() {
        let seq = ParameterSequence::default_demo();
        let img = Image::new(64, 64, [0, 0, 0]);
        let window = default_window(&seq, 5);
        assert_eq!(overlay_annuli(&img, &window, &[], OVERLAY), img);

        let a1 = resolve_overlays(&seq, 5, &["A:1".parse().unwrap()]).unwrap();
        assert_eq!(a1.len(), 1);
        let drawn = overlay_annuli(&img, &window, &a1, OVERLAY);
        assert_ne!(drawn, img);
        // A_1's inner circle crosses the real axis at sqrt 7 + r.
        let right = 7f64.sqrt() + radii(-7.0).unwrap().r;
        let (x, y) = window.to_pixel(Complex64::new(right, 0.0), 64, 64);
        let hit = (-1i64..=1).any(|dx| {
            (-1i64..=1).any(|dy| drawn.get((x as i64 + dx) as usize, (y as i64 + dy) as usize) == OVERLAY)
        });
        assert!(hit);

        assert!(resolve_overlays(&seq, 4, &["A:1".parse().unwrap()]).is_err());
        assert!("C:1".parse::<OverlaySpec>().is_err());
        assert!("B:2:012".parse::<OverlaySpec>().is_err());
        let spec: OverlaySpec = "B:2:*".parse().unwrap();
        assert_eq!(spec.to_string(), "B:2:*");
        let all = resolve_overlays(&seq, seq.checkpoint(1), &[spec]).unwrap();
        assert_eq!(all.len(), 64);
    }

    #[test]
    fn default_windows() {
        let seq = ParameterSequence::default_demo();
        let w5 = default_window(&seq, 5);
        let r = radii(-7.0).unwrap().r;
        assert!((w5.width - 2.2 * (2.0 * 7f64.sqrt() + r)).abs() < 1e-12);
        let w0 = default_window(&seq, 0);
        assert!(w0.width > 2.0 && w0.width < 2.6);
        assert_eq!(default_window(&seq, seq.final_time()).width, 4.4);
    }

    #[test]
    fn stats_count_every_pixel() {
        let seq = build_sequence(&[-7.0, -10.0, -13.0], &PlanPolicy::default()).unwrap();
        let grid = classify_grid(&seq, &RenderConfig::for_time(&seq, 0, 64)).unwrap();
        let s = grid_stats(&grid);
        assert_eq!(s.escaped + s.thick + s.thin, s.total);
        assert!(s.thick > 0);
    }
}
