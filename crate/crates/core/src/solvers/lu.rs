use crate::exec;
use crate::image::{from_pixel_major, ConcentrationMap, SpectralImage};
use crate::linalg::{matvec, pseudo_inverse, row_major};
use crate::mixing::MixingMatrix;
use crate::Result;

use super::check_bands;

/// Pixel-wise least squares `u = M^+ s` through the truncated-SVD
/// pseudo-inverse. For `L < F` this is the minimum-norm solution.
pub fn unmix_lu(s: &SpectralImage, m: &MixingMatrix) -> Result<ConcentrationMap> {
    check_bands(s, m)?;
    let (l, f) = (m.bands(), m.fluorophores());
    let pinv = row_major(&pseudo_inverse(m.matrix()));
    let (out, _) = exec::map_rows(&s.to_pixel_major(), l, f, || (), |_, _, x, o| {
        matvec(&pinv, l, x, o);
    });
    ConcentrationMap::new(from_pixel_major(&out, f, s.dims()), m.labels().to_vec())
}
