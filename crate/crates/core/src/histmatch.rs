//! Per-channel histogram matching (histogram specification).
//!
//! Each source intensity `v` is sent to the smallest target intensity `v'`
//! whose target CDF reaches the source CDF at `v`. The comparison is done on
//! integer cumulative counts, so the mapping is exact for any pixel count.

use crate::error::{Error, Result};
use crate::raster::Image;

/// Number of bins for 8-bit channels.
pub const IMAGE_BINS: usize = 256;

/// Histogram and cumulative distribution of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCdf {
    histogram: Vec<u64>,
    cumulative: Vec<u64>,
    cdf: Vec<f64>,
}

impl ChannelCdf {
    pub fn bins(&self) -> usize {
        self.histogram.len()
    }

    pub fn histogram(&self) -> &[u64] {
        &self.histogram
    }

    /// Running count of values `<= k`.
    pub fn cumulative_counts(&self) -> &[u64] {
        &self.cumulative
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn pixel_count(&self) -> u64 {
        self.cumulative[self.cumulative.len() - 1]
    }

    /// Largest fraction of samples sitting in a single bin.
    pub fn max_bin_mass(&self) -> f64 {
        let max = self.histogram.iter().copied().max().unwrap_or(0);
        max as f64 / self.pixel_count() as f64
    }
}

pub fn compute_cdf<I, T>(values: I, bins: usize) -> Result<ChannelCdf>
where
    I: IntoIterator<Item = T>,
    T: Into<u64>,
{
    if bins == 0 {
        return Err(Error::InvalidShape("bin count must be positive".into()));
    }
    let mut histogram = vec![0u64; bins];
    for v in values {
        let v = v.into();
        match usize::try_from(v).ok().and_then(|i| histogram.get_mut(i)) {
            Some(h) => *h += 1,
            _ => {
                return Err(Error::ValueOutOfRange {
                    value: v as usize,
                    bins,
                })
            }
        }
    }
    let cumulative: Vec<u64> = histogram
        .iter()
        .scan(0u64, |acc, &h| {
            *acc += h;
            Some(*acc)
        })
        .collect();
    let total = cumulative[bins - 1];
    if total == 0 {
        return Err(Error::InvalidShape("empty channel".into()));
    }
    // k / N is exact at k == N, so the last entry is exactly 1
    let cdf = cumulative.iter().map(|&k| k as f64 / total as f64).collect();
    Ok(ChannelCdf {
        histogram,
        cumulative,
        cdf,
    })
}

/// Monotone lookup table from source intensities to target intensities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntensityMap {
    mapping: Vec<usize>,
}

impl IntensityMap {
    pub fn bins(&self) -> usize {
        self.mapping.len()
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn get(&self, v: usize) -> usize {
        self.mapping[v]
    }
}

/// For every `v`, the smallest `v'` with `cdf_t(v') >= cdf_s(v)`.
pub fn build_mapping(source: &ChannelCdf, target: &ChannelCdf) -> Result<IntensityMap> {
    if source.bins() != target.bins() {
        return Err(Error::BinCountMismatch(source.bins(), target.bins()));
    }
    let ns = u128::from(source.pixel_count());
    let nt = u128::from(target.pixel_count());
    let tc = target.cumulative_counts();
    let mut mapping = Vec::with_capacity(source.bins());
    let mut v_target = 0;
    for &cs in source.cumulative_counts() {
        // cdf_t(v') >= cdf_s(v)  <=>  C_t(v') * N_s >= C_s(v) * N_t
        let need = u128::from(cs) * nt;
        while u128::from(tc[v_target]) * ns < need {
            v_target += 1;
        }
        mapping.push(v_target);
    }
    Ok(IntensityMap { mapping })
}

/// Matches every channel of `source` to the same channel of `target`.
pub fn hm_image(source: &Image, target: &Image) -> Result<Image> {
    if source.channels() != target.channels() {
        return Err(Error::ChannelMismatch {
            source_channels: source.channels(),
            target_channels: target.channels(),
        });
    }
    let c = source.channels();
    let maps = (0..c)
        .map(|ch| {
            let cs = compute_cdf(source.channel_plane(ch), IMAGE_BINS)?;
            let ct = compute_cdf(target.channel_plane(ch), IMAGE_BINS)?;
            build_mapping(&cs, &ct)
        })
        .collect::<Result<Vec<_>>>()?;
    let pixels = source
        .pixels()
        .iter()
        .enumerate()
        .map(|(i, &v)| maps[i % c].get(v as usize) as u8)
        .collect();
    Image::new(source.height(), source.width(), c, pixels)
}
