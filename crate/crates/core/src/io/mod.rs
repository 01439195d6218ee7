//! Persistence: the `SPMX1` array container, JSON float encoding and the
//! metric report CSV.

pub mod container;
pub mod float_repr;

pub use container::{
    read_concentration_map, read_container, read_spectral_image, write_concentration_map, write_container,
    write_spectral_image, ContainerHeader, Dtype, Tensor, TensorData, MAGIC,
};

/// Formats a float for CSV output: `inf`, `-inf`, `nan` or the shortest
/// round-tripping decimal.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        v.to_string()
    }
}
