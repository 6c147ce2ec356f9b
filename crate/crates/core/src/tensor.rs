//! Dense single-precision tensors and the deterministic test-data generator.

use crate::error::{Error, Result};

/// A dense row-major `f32` tensor of arbitrary rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let len = element_count(&dims)?;
        if len != data.len() {
            return Err(Error::Config(format!(
                "tensor of shape {dims:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let len = element_count(&dims)?;
        Ok(Tensor {
            dims,
            data: vec![0.0; len],
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
}

fn element_count(dims: &[usize]) -> Result<usize> {
    if dims.contains(&0) {
        return Err(Error::Config(format!("zero-sized dimension in {dims:?}")));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Config(format!("shape {dims:?} overflows")))
}

const LCG_MUL: u64 = 6364136223846793005;
const LCG_INC: u64 = 1442695040888963407;

/// Deterministic values in `[0, 1)` from a 64-bit linear congruential stream.
///
/// The state starts at `seed` and is advanced once before each element is
/// emitted; the top 24 bits of the state become the mantissa of the value.
pub fn gen_tensor(dims: &[usize], seed: u64) -> Result<Tensor> {
    let len = element_count(dims)?;
    let mut state = seed;
    let data = (0..len)
        .map(|_| {
            state = state.wrapping_mul(LCG_MUL).wrapping_add(LCG_INC);
            (state >> 40) as f32 / (1u32 << 24) as f32
        })
        .collect();
    Ok(Tensor {
        dims: dims.to_vec(),
        data,
    })
}

/// Input channels `[c][y][x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image(Tensor);

impl Image {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        Tensor::new(vec![channels, height, width], data).map(Image)
    }

    pub fn from_tensor(t: Tensor) -> Result<Self> {
        if t.dims().len() != 3 {
            return Err(Error::Config(format!(
                "an image must be rank 3 [C, N_y, N_x], got shape {:?}",
                t.dims()
            )));
        }
        Ok(Image(t))
    }

    /// Square `n`×`n` image with `channels` channels filled by [`gen_tensor`].
    pub fn generate(channels: usize, n: usize, seed: u64) -> Result<Self> {
        gen_tensor(&[channels, n, n], seed).map(Image)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(channels, height, width, vec![value; channels * height * width])
    }

    pub fn channels(&self) -> usize {
        self.0.dims[0]
    }

    pub fn height(&self) -> usize {
        self.0.dims[1]
    }

    pub fn width(&self) -> usize {
        self.0.dims[2]
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height() + y) * self.width() + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.0.data[self.index(c, y, x)]
    }

    pub fn data(&self) -> &[f32] {
        self.0.data()
    }

    pub fn as_tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    /// Multiplies every element by `a`.
    pub fn scaled(&self, a: f32) -> Image {
        let mut t = self.0.clone();
        t.data_mut().iter_mut().for_each(|v| *v *= a);
        Image(t)
    }
}

/// `F` square filters of `C` channels, indexed `[f][c][ky][kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank(Tensor);

impl FilterBank {
    pub fn new(filters: usize, channels: usize, size: usize, data: Vec<f32>) -> Result<Self> {
        Tensor::new(vec![filters, channels, size, size], data).map(FilterBank)
    }

    pub fn from_tensor(t: Tensor) -> Result<Self> {
        let d = t.dims();
        if d.len() != 4 || d[2] != d[3] {
            return Err(Error::Config(format!(
                "a filter bank must be rank 4 [F, C, K, K], got shape {d:?}"
            )));
        }
        Ok(FilterBank(t))
    }

    pub fn generate(filters: usize, channels: usize, size: usize, seed: u64) -> Result<Self> {
        gen_tensor(&[filters, channels, size, size], seed).map(FilterBank)
    }

    pub fn filled(filters: usize, channels: usize, size: usize, value: f32) -> Result<Self> {
        let len = filters * channels * size * size;
        Self::new(filters, channels, size, vec![value; len])
    }

    pub fn count(&self) -> usize {
        self.0.dims[0]
    }

    pub fn channels(&self) -> usize {
        self.0.dims[1]
    }

    pub fn size(&self) -> usize {
        self.0.dims[2]
    }

    #[inline]
    pub fn index(&self, f: usize, c: usize, ky: usize, kx: usize) -> usize {
        let k = self.size();
        ((f * self.channels() + c) * k + ky) * k + kx
    }

    #[inline]
    pub fn get(&self, f: usize, c: usize, ky: usize, kx: usize) -> f32 {
        self.0.data[self.index(f, c, ky, kx)]
    }

    pub fn data(&self) -> &[f32] {
        self.0.data()
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        self.0.data_mut()
    }

    pub fn as_tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }
}

/// Output feature maps `[f][y][x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputMap(Tensor);

impl OutputMap {
    pub fn zeros(maps: usize, height: usize, width: usize) -> Result<Self> {
        Tensor::zeros(vec![maps, height, width]).map(OutputMap)
    }

    pub fn from_tensor(t: Tensor) -> Result<Self> {
        if t.dims().len() != 3 {
            return Err(Error::Config(format!(
                "an output map must be rank 3 [F, O_y, O_x], got shape {:?}",
                t.dims()
            )));
        }
        Ok(OutputMap(t))
    }

    pub fn maps(&self) -> usize {
        self.0.dims[0]
    }

    pub fn height(&self) -> usize {
        self.0.dims[1]
    }

    pub fn width(&self) -> usize {
        self.0.dims[2]
    }

    #[inline]
    pub fn index(&self, f: usize, y: usize, x: usize) -> usize {
        (f * self.height() + y) * self.width() + x
    }

    #[inline]
    pub fn get(&self, f: usize, y: usize, x: usize) -> f32 {
        self.0.data[self.index(f, y, x)]
    }

    #[inline]
    pub fn set(&mut self, f: usize, y: usize, x: usize, v: f32) {
        let i = self.index(f, y, x);
        self.0.data[i] = v;
    }

    pub fn data(&self) -> &[f32] {
        self.0.data()
    }

    pub fn as_tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    /// Largest elementwise relative error against `other`, with the
    /// denominator floored at 1 so values near zero are compared absolutely.
    pub fn max_rel_error(&self, other: &OutputMap) -> f32 {
        assert_eq!(self.0.dims, other.0.dims, "shape mismatch");
        self.data()
            .iter()
            .zip(other.data())
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1.0))
            .fold(0.0, f32::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_deterministic() {
        let a = gen_tensor(&[1], 0).unwrap();
        let b = gen_tensor(&[1], 0).unwrap();
        assert_eq!(a, b);
        let a = gen_tensor(&[2, 2], 42).unwrap();
        let b = gen_tensor(&[2, 2], 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generator_first_values_by_hand() {
        // seed 0: s1 = 1442695040888963407, (s1 >> 40) = 1312123
        let t = gen_tensor(&[1], 0).unwrap();
        assert_eq!(t.data()[0], 1312123.0 / 16777216.0);
    }

    #[test]
    fn generator_seeds_differ() {
        let a = gen_tensor(&[8], 1).unwrap();
        let b = gen_tensor(&[8], 2).unwrap();
        assert!(a.data().iter().zip(b.data()).any(|(x, y)| x != y));
    }

    #[test]
    fn generator_range() {
        let t = gen_tensor(&[4096], 7).unwrap();
        assert!(t.data().iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(gen_tensor(&[3, 0], 1).is_err());
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn image_indexing() {
        let img = Image::new(2, 2, 3, (0..12).map(|v| v as f32).collect()).unwrap();
        assert_eq!(img.get(1, 1, 2), 11.0);
        assert_eq!(img.get(0, 1, 0), 3.0);
    }
}
