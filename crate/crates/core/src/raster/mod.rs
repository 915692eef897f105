//! Image containers, label maps, masks, convolution, pyramids and PNG I/O.

mod image;
pub mod io;
mod kernel;
mod label;
mod mask;
mod pyramid;

pub use self::image::{luma, reflect, to_grayscale, RasterImage};
pub use self::kernel::{
    convolve, gaussian_kernel, gaussian_kernel_with_radius, gaussian_weight, GaussianKernel, Kernel,
};
pub use self::label::{snap_to_palette, ClassId, LabelMap, Palette, PaletteEntry};
pub use self::mask::BinaryMask;
pub use self::pyramid::{build_pyramid, Downsample, ImagePyramid};
