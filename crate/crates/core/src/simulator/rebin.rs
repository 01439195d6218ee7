use std::ops::Range;

use ndarray::{s, Array4, Axis};

use crate::bands::validate_partition;
use crate::image::SpectralImage;
use crate::Result;

/// Sums contiguous groups of bands. Per-voxel totals are preserved up to
/// floating-point summation order (exactly for integer-valued data).
pub fn rebin_bands(img: &SpectralImage, groups: &[Range<usize>]) -> Result<SpectralImage> {
    validate_partition(groups, img.bands())?;
    let (z, y, x) = img.dims();
    let mut out = Array4::zeros((groups.len(), z, y, x));
    for (mut dst, g) in out.axis_iter_mut(Axis(0)).zip(groups) {
        for l in g.clone() {
            dst += &img.data().slice(s![l, .., .., ..]);
        }
    }
    let layout = img.layout().map(|lay| lay.merged(groups)).transpose()?;
    Ok(SpectralImage::new(out, layout)?.with_meta(img.meta.clone()))
}
