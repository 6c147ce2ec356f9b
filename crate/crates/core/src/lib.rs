//! Transaction-level simulation of a GPU memory hierarchy and of two tiled
//! direct-convolution kernels that run on it.

pub mod costmodel;
pub mod error;
pub mod general;
pub mod io;
pub mod memsim;
pub mod oracle;
pub mod special;
pub mod tensor;
pub mod tiling;

pub use error::{Error, Result};
pub use tensor::{gen_tensor, FilterBank, Image, OutputMap, Tensor};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/tensors.md")]
    mod tensors {}
    #[doc = include_str!("../../../book/src/memory-model.md")]
    mod memory_model {}
    #[doc = include_str!("../../../book/src/special-kernel.md")]
    mod special_kernel {}
    #[doc = include_str!("../../../book/src/general-kernel.md")]
    mod general_kernel {}
    #[doc = include_str!("../../../book/src/cost-model.md")]
    mod cost_model {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
