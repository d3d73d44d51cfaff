//! Grid data model: dense (height, width, channels) tensors, the
//! volume/speed channel layout, activity masks and input/target windows.

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

/// Dense row-major (h, w, c) tensor. The universal payload: traffic frames,
/// point estimates, uncertainty maps and calibration grids all use it.
///
/// Traffic data tensors additionally keep every value finite and inside
/// [0, 255]; that range is enforced at the data boundaries (the synthetic
/// generator and u8 file decoding), not by this container, because derived
/// grids (scores, quantiles) legitimately leave it.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTensor<F: Scalar> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<F>,
}

impl<F: Scalar> GridTensor<F> {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<F>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(CoreError::InvalidParam(
                "tensor dimensions must be positive".into(),
            ));
        }
        if data.len() != height * width * channels {
            return Err(CoreError::ShapeMismatch(format!(
                "data length {} != {}x{}x{}",
                data.len(),
                height,
                width,
                channels
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![F::zero(); height * width * channels],
        }
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: F) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn idx(&self, h: usize, w: usize, c: usize) -> usize {
        (h * self.width + w) * self.channels + c
    }

    #[inline]
    pub fn get(&self, h: usize, w: usize, c: usize) -> F {
        self.data[self.idx(h, w, c)]
    }

    #[inline]
    pub fn set(&mut self, h: usize, w: usize, c: usize, value: F) {
        let i = self.idx(h, w, c);
        self.data[i] = value;
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }

    pub fn ensure_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if !self.same_shape(other) {
            return Err(CoreError::ShapeMismatch(format!(
                "{what}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// True when every value is finite and inside [0, 255] — the contract for
    /// traffic data payloads.
    pub fn in_traffic_range(&self) -> bool {
        let hi = F::from_f64_c(255.0);
        self.data
            .iter()
            .all(|v| v.is_finite() && *v >= F::zero() && *v <= hi)
    }

    pub fn map<G: Scalar>(&self, f: impl Fn(F) -> G) -> GridTensor<G> {
        GridTensor {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two same-shape tensors.
    pub fn zip_map(&self, other: &Self, f: impl Fn(F, F) -> F) -> Result<Self> {
        self.ensure_same_shape(other, "zip_map")?;
        Ok(Self {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

/// Volume/speed channel semantics: which channels carry directional volume
/// and which carry the paired directional speed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelLayout {
    n_directions: usize,
    volume_channels: Vec<usize>,
    speed_channels: Vec<usize>,
}

impl ChannelLayout {
    pub fn new(volume_channels: Vec<usize>, speed_channels: Vec<usize>) -> Result<Self> {
        if volume_channels.len() != speed_channels.len() || volume_channels.is_empty() {
            return Err(CoreError::InvalidParam(
                "volume and speed channel lists must be non-empty and equal length".into(),
            ));
        }
        let n = volume_channels.len();
        let mut seen = vec![false; 2 * n];
        for &c in volume_channels.iter().chain(speed_channels.iter()) {
            if c >= 2 * n || seen[c] {
                return Err(CoreError::InvalidParam(format!(
                    "channel index {c} out of range or duplicated"
                )));
            }
            seen[c] = true;
        }
        Ok(Self {
            n_directions: n,
            volume_channels,
            speed_channels,
        })
    }

    /// The 8-channel layout used throughout: 4 directional volume channels
    /// followed by the 4 paired directional speed channels.
    pub fn default_eight() -> Self {
        Self {
            n_directions: 4,
            volume_channels: vec![0, 1, 2, 3],
            speed_channels: vec![4, 5, 6, 7],
        }
    }

    pub fn n_directions(&self) -> usize {
        self.n_directions
    }

    pub fn n_channels(&self) -> usize {
        2 * self.n_directions
    }

    pub fn volume_channels(&self) -> &[usize] {
        &self.volume_channels
    }

    pub fn speed_channels(&self) -> &[usize] {
        &self.speed_channels
    }

    /// Paired volume channel for a speed channel, if the given channel is one.
    pub fn paired_volume(&self, channel: usize) -> Option<usize> {
        self.speed_channels
            .iter()
            .position(|&s| s == channel)
            .map(|d| self.volume_channels[d])
    }

    pub fn is_volume(&self, channel: usize) -> bool {
        self.volume_channels.contains(&channel)
    }
}

/// Per-cell boolean activity mask tied to a tensor shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityMask {
    height: usize,
    width: usize,
    channels: usize,
    mask: Vec<bool>,
}

impl ActivityMask {
    pub fn new(height: usize, width: usize, channels: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != height * width * channels {
            return Err(CoreError::ShapeMismatch(format!(
                "mask length {} != {}x{}x{}",
                mask.len(),
                height,
                width,
                channels
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            mask,
        })
    }

    pub fn all_active(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            mask: vec![true; height * width * channels],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn is_active(&self, h: usize, w: usize, c: usize) -> bool {
        self.mask[(h * self.width + w) * self.channels + c]
    }

    #[inline]
    pub fn is_active_flat(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn n_active(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.mask
    }
}

/// Marks a cell active when its directional volume is nonzero in at least one
/// frame; speed cells inherit the activity of their paired volume cell at the
/// same pixel.
pub fn activity_mask<F: Scalar>(
    frames: &[GridTensor<F>],
    layout: &ChannelLayout,
) -> Result<ActivityMask> {
    let first = frames.first().ok_or(CoreError::EmptyInput("frames"))?;
    let (h, w, c) = first.shape();
    if c != layout.n_channels() {
        return Err(CoreError::ShapeMismatch(format!(
            "layout expects {} channels, tensor has {c}",
            layout.n_channels()
        )));
    }
    for f in frames {
        first.ensure_same_shape(f, "activity_mask frames")?;
    }

    let mut mask = vec![false; h * w * c];
    for frame in frames {
        for hh in 0..h {
            for ww in 0..w {
                for &vc in layout.volume_channels() {
                    if frame.get(hh, ww, vc) != F::zero() {
                        mask[(hh * w + ww) * c + vc] = true;
                    }
                }
            }
        }
    }
    // speed cells follow their paired volume cell
    for hh in 0..h {
        for ww in 0..w {
            for d in 0..layout.n_directions() {
                let vc = layout.volume_channels()[d];
                let sc = layout.speed_channels()[d];
                mask[(hh * w + ww) * c + sc] = mask[(hh * w + ww) * c + vc];
            }
        }
    }
    ActivityMask::new(h, w, c, mask)
}

/// One supervised window: 12 input frames at 5-minute spacing and 6 target
/// frames at horizons {5, 10, 15, 30, 45, 60} minutes past the last input.
#[derive(Debug, Clone)]
pub struct SampleSequence<F: Scalar> {
    inputs: Vec<GridTensor<F>>,
    targets: Vec<GridTensor<F>>,
}

pub const INPUT_FRAMES: usize = 12;
pub const TARGET_FRAMES: usize = 6;
/// Frame-step offsets of the six targets past the last input frame.
pub const TARGET_OFFSETS: [usize; TARGET_FRAMES] = [1, 2, 3, 6, 9, 12];

impl<F: Scalar> SampleSequence<F> {
    pub fn new(inputs: Vec<GridTensor<F>>, targets: Vec<GridTensor<F>>) -> Result<Self> {
        if inputs.len() != INPUT_FRAMES {
            return Err(CoreError::ShapeMismatch(format!(
                "expected {INPUT_FRAMES} input frames, got {}",
                inputs.len()
            )));
        }
        if targets.len() != TARGET_FRAMES {
            return Err(CoreError::ShapeMismatch(format!(
                "expected {TARGET_FRAMES} target frames, got {}",
                targets.len()
            )));
        }
        let first = &inputs[0];
        for f in inputs.iter().chain(targets.iter()) {
            first.ensure_same_shape(f, "sample sequence frames")?;
        }
        Ok(Self { inputs, targets })
    }

    pub fn inputs(&self) -> &[GridTensor<F>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[GridTensor<F>] {
        &self.targets
    }

    /// Target frame for a horizon index in 0..6 (5 is the 60-minute horizon).
    pub fn target(&self, horizon: usize) -> &GridTensor<F> {
        &self.targets[horizon]
    }

    pub fn frame_shape(&self) -> (usize, usize, usize) {
        self.inputs[0].shape()
    }
}
