//! Deterministic synthetic city-traffic generator: road networks with two
//! road classes, daily and weekly rhythms, heteroscedastic multiplicative
//! noise, and injectable regime shifts with known ground truth. Identical
//! configs produce bit-identical datasets; each day draws from its own
//! derived RNG stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::grid::{
    ActivityMask, ChannelLayout, GridTensor, SampleSequence, INPUT_FRAMES, TARGET_OFFSETS,
};
use crate::scalar::Scalar;

pub const FRAMES_PER_DAY: usize = 288;
/// Usable windows per day: one per start where the 12 input frames lie
/// within the day.
pub const WINDOWS_PER_DAY: usize = FRAMES_PER_DAY - INPUT_FRAMES;
/// Frames beyond the last day that the final windows' targets reach into.
pub const TAIL_FRAMES: usize = INPUT_FRAMES + TARGET_OFFSETS[TARGET_OFFSETS.len() - 1] - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoadClass {
    Arterial,
    Side,
}

impl RoadClass {
    fn index(self) -> usize {
        match self {
            RoadClass::Arterial => 0,
            RoadClass::Side => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CityConfig {
    pub height: usize,
    pub width: usize,
    pub n_arterials: usize,
    pub n_side_roads: usize,
    /// Rush-hour centers as fractional hours of day.
    pub rush_hour_peaks: [f64; 2],
    /// Weekday-to-weekend mean volume ratio, > 1.
    pub weekday_weekend_ratio: f64,
    /// Lognormal noise sigma per road class [arterial, side].
    pub noise_scale: [f64; 2],
    pub seed: u64,
}

impl Default for CityConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            n_arterials: 4,
            n_side_roads: 10,
            rush_hour_peaks: [8.0, 18.0],
            weekday_weekend_ratio: 2.0,
            noise_scale: [0.30, 0.15],
            seed: 0,
        }
    }
}

impl CityConfig {
    fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(CoreError::InvalidParam("city extent must be positive".into()));
        }
        if self.weekday_weekend_ratio <= 1.0 {
            return Err(CoreError::InvalidParam(
                "weekday_weekend_ratio must exceed 1".into(),
            ));
        }
        if self.noise_scale.iter().any(|&s| s < 0.0) {
            return Err(CoreError::InvalidParam("noise scales must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl PixelRect {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        i >= self.row && i < self.row + self.height && j >= self.col && j < self.col + self.width
    }

    fn intersects(&self, other: &PixelRect) -> bool {
        self.row < other.row + other.height
            && other.row < self.row + self.height
            && self.col < other.col + other.width
            && other.col < self.col + self.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftKind {
    VolumeDrop,
    PatternRegularization,
    VarianceIncrease,
}

impl ShiftKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ShiftKind::VolumeDrop => "volume-drop",
            ShiftKind::PatternRegularization => "pattern-regularization",
            ShiftKind::VarianceIncrease => "variance-increase",
        }
    }
}

/// A dated, localized change to the traffic statistics, active from
/// `onset_day` to the end of the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftSpec {
    pub region: PixelRect,
    pub onset_day: usize,
    pub kind: ShiftKind,
    pub magnitude: f64,
}

/// Generated dataset: the contiguous frame stream (including the tail frames
/// the last day's targets reach into) plus ground-truth metadata.
#[derive(Debug, Clone)]
pub struct SynthDataset<F: Scalar> {
    pub config: CityConfig,
    pub n_days: usize,
    /// `n_days * 288 + TAIL_FRAMES` frames, 8 channels each.
    pub frames: Vec<GridTensor<F>>,
    /// Per-pixel road class (row-major).
    pub road_class: Vec<Option<RoadClass>>,
    /// Per-pixel membership in any shift region.
    pub shift_mask: Vec<bool>,
    /// Per-pixel noise sigma actually configured (0 off-road).
    pub noise_map: Vec<f64>,
    pub shifts: Vec<ShiftSpec>,
}

struct RoadNetwork {
    /// Per-pixel class, row-major.
    class: Vec<Option<RoadClass>>,
    /// Road pixels in fixed scan order: (pixel index, class, volume channel pair).
    pixels: Vec<(usize, RoadClass, [usize; 2])>,
}

/// Horizontal roads carry the NE/SW channel pair, vertical roads SE/NW.
const HORIZONTAL_CHANNELS: [usize; 2] = [0, 2];
const VERTICAL_CHANNELS: [usize; 2] = [1, 3];

fn build_network(cfg: &CityConfig) -> RoadNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0);
    let (h, w) = (cfg.height, cfg.width);
    // 0 = none, or (class, horizontal?)
    let mut cells: Vec<Option<(RoadClass, bool)>> = vec![None; h * w];

    let lay = |cells: &mut Vec<Option<(RoadClass, bool)>>,
                   class: RoadClass,
                   horizontal: bool,
                   fixed: usize,
                   from: usize,
                   to: usize| {
        for t in from..to {
            let (i, j) = if horizontal { (fixed, t) } else { (t, fixed) };
            let slot = &mut cells[i * w + j];
            // arterials win overlaps; first writer wins within a class
            match slot {
                Some((RoadClass::Arterial, _)) => {}
                Some((RoadClass::Side, _)) if class == RoadClass::Arterial => {
                    *slot = Some((class, horizontal));
                }
                Some(_) => {}
                None => *slot = Some((class, horizontal)),
            }
        }
    };

    for k in 0..cfg.n_arterials {
        let horizontal = k % 2 == 0;
        let extent = if horizontal { h } else { w };
        let span = if horizontal { w } else { h };
        let fixed = rng.random_range(0..extent);
        lay(&mut cells, RoadClass::Arterial, horizontal, fixed, 0, span);
    }
    for _ in 0..cfg.n_side_roads {
        let horizontal = rng.random_bool(0.5);
        let extent = if horizontal { h } else { w };
        let span = if horizontal { w } else { h };
        let fixed = rng.random_range(0..extent);
        let len = (span / 3).max(2).min(span);
        let from = rng.random_range(0..=span - len);
        lay(
            &mut cells,
            RoadClass::Side,
            horizontal,
            fixed,
            from,
            from + len,
        );
    }

    let mut class = vec![None; h * w];
    let mut pixels = Vec::new();
    for (idx, slot) in cells.iter().enumerate() {
        if let Some((c, horizontal)) = slot {
            class[idx] = Some(*c);
            let channels = if *horizontal {
                HORIZONTAL_CHANNELS
            } else {
                VERTICAL_CHANNELS
            };
            pixels.push((idx, *c, channels));
        }
    }
    RoadNetwork { class, pixels }
}

/// Daily demand profile in [0, ~1.1]: a night floor plus Gaussian rush-hour
/// bumps with wraparound hour distance.
fn daily_profile(hour: f64, peaks: &[f64; 2]) -> f64 {
    let mut v = 0.06;
    for &p in peaks {
        let d = (hour - p).abs();
        let d = d.min(24.0 - d);
        v += (-d * d / (2.0 * 1.6 * 1.6)).exp();
    }
    v
}

const VOLUME_SCALE: f64 = 140.0;
const CLASS_STRENGTH: [f64; 2] = [0.8, 0.4];
const FREE_FLOW: [f64; 2] = [170.0, 110.0];
const CONGESTION: f64 = 0.6;

fn is_weekend(day: usize) -> bool {
    day % 7 >= 5
}

/// Box-Muller standard normal; two uniform draws per value keeps the stream
/// layout independent of caller state.
fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn validate_shifts(cfg: &CityConfig, n_days: usize, shifts: &[ShiftSpec]) -> Result<()> {
    for s in shifts {
        if s.region.row + s.region.height > cfg.height
            || s.region.col + s.region.width > cfg.width
            || s.region.height == 0
            || s.region.width == 0
        {
            return Err(CoreError::InvalidParam(format!(
                "shift region {:?} outside {}x{}",
                s.region, cfg.height, cfg.width
            )));
        }
        if s.onset_day >= n_days {
            return Err(CoreError::InvalidParam(format!(
                "shift onset day {} beyond horizon {n_days}",
                s.onset_day
            )));
        }
        if !(0.0..=1.0).contains(&s.magnitude) && s.kind == ShiftKind::VolumeDrop {
            return Err(CoreError::InvalidParam(
                "volume-drop magnitude must be in [0, 1]".into(),
            ));
        }
        if s.magnitude < 0.0 {
            return Err(CoreError::InvalidParam("shift magnitude must be >= 0".into()));
        }
    }
    for (a, b) in shifts
        .iter()
        .enumerate()
        .flat_map(|(i, a)| shifts[i + 1..].iter().map(move |b| (a, b)))
    {
        // shifts stay active to the horizon end, so any region overlap makes
        // their composition ambiguous
        if a.region.intersects(&b.region) {
            return Err(CoreError::InvalidParam(format!(
                "contradictory shifts: {:?} overlaps {:?}",
                a.region, b.region
            )));
        }
    }
    Ok(())
}

/// Generates `n_days` of frames (plus the window tail) with the configured
/// rhythms, noise and shifts.
pub fn generate<F: Scalar>(
    cfg: &CityConfig,
    n_days: usize,
    shifts: &[ShiftSpec],
) -> Result<SynthDataset<F>> {
    cfg.validate()?;
    if n_days == 0 {
        return Err(CoreError::InvalidParam("n_days must be >= 1".into()));
    }
    validate_shifts(cfg, n_days, shifts)?;
    let network = build_network(cfg);
    let (h, w) = (cfg.height, cfg.width);
    let layout = ChannelLayout::default_eight();

    let mut frames = Vec::with_capacity(n_days * FRAMES_PER_DAY + TAIL_FRAMES);
    for day in 0..=n_days {
        let frames_today = if day == n_days {
            TAIL_FRAMES
        } else {
            FRAMES_PER_DAY
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1 + day as u64);
        let weekend = is_weekend(day);
        let base_weekday_factor = if weekend {
            1.0 / cfg.weekday_weekend_ratio
        } else {
            1.0
        };
        for f in 0..frames_today {
            let hour = f as f64 / 12.0;
            let demand = daily_profile(hour, &cfg.rush_hour_peaks);
            let mut frame = GridTensor::<F>::zeros(h, w, 8);
            for &(px, class, channels) in &network.pixels {
                let (i, j) = (px / w, px % w);
                let mut noise_sigma = cfg.noise_scale[class.index()];
                let mut weekday_factor = base_weekday_factor;
                let mut volume_factor = 1.0;
                for s in shifts {
                    if day >= s.onset_day && s.region.contains(i, j) {
                        match s.kind {
                            ShiftKind::VolumeDrop => volume_factor *= 1.0 - s.magnitude,
                            ShiftKind::PatternRegularization => {
                                weekday_factor += s.magnitude * (1.0 - weekday_factor);
                                noise_sigma *= 1.0 - 0.5 * s.magnitude;
                            }
                            ShiftKind::VarianceIncrease => noise_sigma *= 1.0 + s.magnitude,
                        }
                    }
                }
                let mean_level =
                    VOLUME_SCALE * CLASS_STRENGTH[class.index()] * demand * weekday_factor;
                for &vc in &channels {
                    // the draws happen for every road cell regardless of
                    // shifts, keeping the stream identical across shift
                    // configurations
                    let zv = std_normal(&mut rng);
                    let zs = std_normal(&mut rng);
                    let vol_noise = (noise_sigma * zv - 0.5 * noise_sigma * noise_sigma).exp();
                    let vol = (mean_level * vol_noise * volume_factor).clamp(0.0, 255.0);
                    let speed_sigma = 0.5 * noise_sigma;
                    let speed_noise =
                        (speed_sigma * zs - 0.5 * speed_sigma * speed_sigma).exp();
                    let speed = (FREE_FLOW[class.index()]
                        * (1.0 - CONGESTION * (vol / 255.0))
                        * speed_noise)
                        .clamp(0.0, 255.0);
                    let sc = layout.speed_channels()
                        [layout.volume_channels().iter().position(|&c| c == vc).unwrap()];
                    frame.set(i, j, vc, F::from_f64_c(vol));
                    frame.set(i, j, sc, F::from_f64_c(speed));
                }
            }
            frames.push(frame);
        }
    }

    let mut shift_mask = vec![false; h * w];
    for s in shifts {
        for i in 0..h {
            for j in 0..w {
                if s.region.contains(i, j) {
                    shift_mask[i * w + j] = true;
                }
            }
        }
    }
    let noise_map = network
        .class
        .iter()
        .map(|c| c.map_or(0.0, |cl| cfg.noise_scale[cl.index()]))
        .collect();

    Ok(SynthDataset {
        config: cfg.clone(),
        n_days,
        frames,
        road_class: network.class,
        shift_mask,
        noise_map,
        shifts: shifts.to_vec(),
    })
}

impl<F: Scalar> SynthDataset<F> {
    /// Frames of one calendar day (without the tail).
    pub fn day_frames(&self, day: usize) -> &[GridTensor<F>] {
        &self.frames[day * FRAMES_PER_DAY..(day + 1) * FRAMES_PER_DAY]
    }

    /// Materializes the window starting at `offset` within `day`.
    pub fn window(&self, day: usize, offset: usize) -> Result<SampleSequence<F>> {
        if day >= self.n_days || offset >= WINDOWS_PER_DAY {
            return Err(CoreError::InvalidParam(format!(
                "window (day {day}, offset {offset}) out of range"
            )));
        }
        let start = day * FRAMES_PER_DAY + offset;
        let inputs = self.frames[start..start + INPUT_FRAMES].to_vec();
        let last = start + INPUT_FRAMES - 1;
        let targets = TARGET_OFFSETS
            .iter()
            .map(|&o| self.frames[last + o].clone())
            .collect();
        SampleSequence::new(inputs, targets)
    }

    /// Frame at a fixed time index within a day.
    pub fn frame_at(&self, day: usize, index: usize) -> &GridTensor<F> {
        &self.frames[day * FRAMES_PER_DAY + index]
    }

    pub fn road_pixel_count(&self) -> usize {
        self.road_class.iter().filter(|c| c.is_some()).count()
    }

    /// Activity mask derived from every frame of the requested days.
    pub fn activity_mask_for_days(&self, days: std::ops::Range<usize>) -> Result<ActivityMask> {
        let frames: Vec<GridTensor<F>> = days
            .flat_map(|d| self.day_frames(d).iter().cloned())
            .collect();
        crate::grid::activity_mask(&frames, &ChannelLayout::default_eight())
    }
}

/// A window reference: which day and which in-day start offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowRef {
    pub day: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitScheme {
    pub train_days: usize,
    pub val_days: usize,
    pub test_days: usize,
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Vec<WindowRef>,
    pub val: Vec<WindowRef>,
    pub test: Vec<WindowRef>,
    pub scheme: SplitScheme,
}

/// Chronologically disjoint train/validation/test windows; the validation
/// split feeds conformal calibration.
pub fn train_val_test_split<F: Scalar>(
    dataset: &SynthDataset<F>,
    scheme: SplitScheme,
) -> Result<Splits> {
    let needed = scheme.train_days + scheme.val_days + scheme.test_days;
    if scheme.train_days == 0 || scheme.val_days == 0 || scheme.test_days == 0 {
        return Err(CoreError::InvalidParam(
            "every split needs at least one day".into(),
        ));
    }
    if needed > dataset.n_days {
        return Err(CoreError::InsufficientSamples {
            needed,
            got: dataset.n_days,
        });
    }
    let windows_of = |days: std::ops::Range<usize>| -> Vec<WindowRef> {
        days.flat_map(|day| (0..WINDOWS_PER_DAY).map(move |offset| WindowRef { day, offset }))
            .collect()
    };
    let t = scheme.train_days;
    let v = t + scheme.val_days;
    let e = v + scheme.test_days;
    Ok(Splits {
        train: windows_of(0..t),
        val: windows_of(t..v),
        test: windows_of(v..e),
        scheme,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> CityConfig {
        CityConfig {
            height: 16,
            width: 16,
            n_arterials: 2,
            n_side_roads: 3,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = small_config();
        let a: SynthDataset<f32> = generate(&cfg, 1, &[]).unwrap();
        let b: SynthDataset<f32> = generate(&cfg, 1, &[]).unwrap();
        assert_eq!(a.frames.len(), b.frames.len());
        for (x, y) in a.frames.iter().zip(&b.frames) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn zero_roads_give_all_zero_frames() {
        let cfg = CityConfig {
            n_arterials: 0,
            n_side_roads: 0,
            ..small_config()
        };
        let ds: SynthDataset<f64> = generate(&cfg, 1, &[]).unwrap();
        assert!(ds.frames.iter().all(|f| f.data().iter().all(|&v| v == 0.0)));
        let mask = ds.activity_mask_for_days(0..1).unwrap();
        assert_eq!(mask.n_active(), 0);
    }

    #[test]
    fn values_stay_in_traffic_range() {
        let ds: SynthDataset<f64> = generate(&small_config(), 2, &[]).unwrap();
        for f in &ds.frames {
            assert!(f.in_traffic_range());
        }
    }

    #[test]
    fn zero_magnitude_shift_is_a_no_op() {
        let cfg = small_config();
        let shift = ShiftSpec {
            region: PixelRect {
                row: 2,
                col: 2,
                height: 6,
                width: 6,
            },
            onset_day: 0,
            kind: ShiftKind::VolumeDrop,
            magnitude: 0.0,
        };
        let plain: SynthDataset<f64> = generate(&cfg, 2, &[]).unwrap();
        let shifted: SynthDataset<f64> = generate(&cfg, 2, &[shift]).unwrap();
        for (a, b) in plain.frames.iter().zip(&shifted.frames) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rush_hour_beats_night_by_at_least_double() {
        let ds: SynthDataset<f64> = generate(&small_config(), 1, &[]).unwrap();
        let road_mean = |frame: &GridTensor<f64>| -> f64 {
            let mut sum = 0.0;
            let mut n = 0;
            for (px, cl) in ds.road_class.iter().enumerate() {
                if cl.is_none() {
                    continue;
                }
                let (i, j) = (px / ds.config.width, px % ds.config.width);
                for c in 0..4 {
                    sum += frame.get(i, j, c);
                    n += 1;
                }
            }
            sum / n as f64
        };
        let rush = road_mean(ds.frame_at(0, 8 * 12));
        let night = road_mean(ds.frame_at(0, 3 * 12));
        assert!(
            rush >= 2.0 * night,
            "rush {rush} not at least twice night {night}"
        );
    }

    #[test]
    fn weekend_ratio_matches_config() {
        let cfg = CityConfig {
            seed: 3,
            ..small_config()
        };
        let ds: SynthDataset<f64> = generate(&cfg, 7, &[]).unwrap();
        let day_mean = |day: usize| -> f64 {
            let mut sum = 0.0;
            let mut n = 0usize;
            for f in ds.day_frames(day) {
                for (px, cl) in ds.road_class.iter().enumerate() {
                    if cl.is_none() {
                        continue;
                    }
                    let (i, j) = (px / cfg.width, px % cfg.width);
                    for c in 0..4 {
                        sum += f.get(i, j, c);
                        n += 1;
                    }
                }
            }
            sum / n as f64
        };
        let weekday = (0..5).map(day_mean).sum::<f64>() / 5.0;
        let weekend = (5..7).map(day_mean).sum::<f64>() / 2.0;
        let ratio = weekday / weekend;
        let expect = cfg.weekday_weekend_ratio;
        assert!(
            (ratio - expect).abs() / expect < 0.10,
            "ratio {ratio} vs configured {expect}"
        );
    }

    #[test]
    fn window_arithmetic_matches_scheme() {
        let ds: SynthDataset<f32> = generate(&small_config(), 10, &[]).unwrap();
        let splits = train_val_test_split(
            &ds,
            SplitScheme {
                train_days: 6,
                val_days: 2,
                test_days: 2,
            },
        )
        .unwrap();
        assert_eq!(splits.train.len(), 6 * WINDOWS_PER_DAY);
        assert_eq!(splits.val.len(), 2 * WINDOWS_PER_DAY);
        assert_eq!(splits.test.len(), 2 * WINDOWS_PER_DAY);
        assert_eq!(WINDOWS_PER_DAY, 276);
        // pairwise disjoint
        use std::collections::HashSet;
        let as_set = |v: &[WindowRef]| -> HashSet<(usize, usize)> {
            v.iter().map(|w| (w.day, w.offset)).collect()
        };
        let (a, b, c) = (as_set(&splits.train), as_set(&splits.val), as_set(&splits.test));
        assert!(a.is_disjoint(&b) && b.is_disjoint(&c) && a.is_disjoint(&c));
    }

    #[test]
    fn too_few_days_error() {
        let ds: SynthDataset<f32> = generate(&small_config(), 1, &[]).unwrap();
        assert!(train_val_test_split(
            &ds,
            SplitScheme {
                train_days: 1,
                val_days: 1,
                test_days: 1,
            }
        )
        .is_err());
    }

    #[test]
    fn every_window_materializes_even_on_the_last_day() {
        let ds: SynthDataset<f32> = generate(&small_config(), 2, &[]).unwrap();
        let w = ds.window(1, WINDOWS_PER_DAY - 1).unwrap();
        assert_eq!(w.inputs().len(), 12);
        assert_eq!(w.targets().len(), 6);
    }

    #[test]
    fn overlapping_shifts_are_rejected() {
        let cfg = small_config();
        let mk = |row, col, kind| ShiftSpec {
            region: PixelRect {
                row,
                col,
                height: 5,
                width: 5,
            },
            onset_day: 0,
            kind,
            magnitude: 0.5,
        };
        let err = generate::<f64>(
            &cfg,
            2,
            &[mk(0, 0, ShiftKind::VolumeDrop), mk(3, 3, ShiftKind::VarianceIncrease)],
        );
        assert!(err.is_err());
        // disjoint regions are fine
        let ok = generate::<f64>(
            &cfg,
            2,
            &[mk(0, 0, ShiftKind::VolumeDrop), mk(8, 8, ShiftKind::VarianceIncrease)],
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn volume_drop_reduces_region_mean_only() {
        let cfg = CityConfig {
            n_arterials: 4,
            n_side_roads: 0,
            seed: 11,
            ..small_config()
        };
        let region = PixelRect {
            row: 0,
            col: 0,
            height: 8,
            width: 16,
        };
        let shift = ShiftSpec {
            region,
            onset_day: 0,
            kind: ShiftKind::VolumeDrop,
            magnitude: 0.6,
        };
        let plain: SynthDataset<f64> = generate(&cfg, 1, &[]).unwrap();
        let shifted: SynthDataset<f64> = generate(&cfg, 1, &[shift]).unwrap();
        let mean_in = |ds: &SynthDataset<f64>, inside: bool| -> f64 {
            let mut sum = 0.0;
            let mut n = 0usize;
            for f in ds.day_frames(0) {
                for (px, cl) in ds.road_class.iter().enumerate() {
                    if cl.is_none() {
                        continue;
                    }
                    let (i, j) = (px / cfg.width, px % cfg.width);
                    if region.contains(i, j) != inside {
                        continue;
                    }
                    for c in 0..4 {
                        sum += f.get(i, j, c);
                        n += 1;
                    }
                }
            }
            sum / n.max(1) as f64
        };
        let drop = mean_in(&shifted, true) / mean_in(&plain, true);
        assert!((drop - 0.4).abs() < 0.05, "volume kept {drop}");
        // outside the region the streams are bit-identical
        assert_eq!(mean_in(&shifted, false), mean_in(&plain, false));
    }

    #[test]
    fn unshifted_region_distribution_is_unchanged_under_ks() {
        use crate::stats::ks_test_2samp;
        let cfg = CityConfig {
            seed: 5,
            ..small_config()
        };
        let region = PixelRect {
            row: 0,
            col: 0,
            height: 4,
            width: 4,
        };
        let shift = ShiftSpec {
            region,
            onset_day: 1,
            kind: ShiftKind::VarianceIncrease,
            magnitude: 2.0,
        };
        let ds: SynthDataset<f64> = generate(&cfg, 3, &[shift]).unwrap();
        // compare day 0 (pre-onset) vs day 1 (post-onset) at the same hours
        // for pixels OUTSIDE the region: same weekday class, same law
        let collect = |day: usize, inside: bool| -> Vec<f64> {
            let mut vals = Vec::new();
            for f in ds.day_frames(day) {
                for (px, cl) in ds.road_class.iter().enumerate() {
                    if cl.is_none() {
                        continue;
                    }
                    let (i, j) = (px / cfg.width, px % cfg.width);
                    if region.contains(i, j) != inside {
                        continue;
                    }
                    let v = f.get(i, j, 0);
                    if v > 0.0 {
                        vals.push(v);
                    }
                }
            }
            vals
        };
        let outside_pre = collect(0, false);
        let outside_post = collect(1, false);
        let res = ks_test_2samp(&outside_pre, &outside_post).unwrap();
        assert!(res.p_value > 0.01, "unshifted region changed: p {}", res.p_value);
    }
}
