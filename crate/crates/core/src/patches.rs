//! Overlapping patch extraction and overlap-averaged reassembly.
//!
//! Each `w x w` window is vectorized column-major: pixel `(r, c)` of the
//! window lands at index `c * w + r`. Model files depend on this order.

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Vectorized patches of one image laid out as an `m x n` column-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    patch_side: usize,
    stride: usize,
    image_dims: (usize, usize),
    grid_dims: (usize, usize),
    positions: Vec<(usize, usize)>,
    data: Vec<f64>,
}

/// Stride-1 overlapping patches in raster order.
pub fn extract_patches(image: &GrayImage, patch_side: usize) -> Result<PatchGrid> {
    PatchGrid::extract(image, patch_side, 1)
}

/// Non-overlapping `w x w` tiles; trailing rows/columns that do not fill a
/// whole tile are left out.
pub fn extract_tiles(image: &GrayImage, patch_side: usize) -> Result<PatchGrid> {
    PatchGrid::extract(image, patch_side, patch_side)
}

/// Averages every patch estimate into the pixels it covers and clips to [0, 255].
/// Pixels covered by no patch are set to zero.
pub fn assemble_patches(patches: &PatchGrid) -> GrayImage {
    let (h, w) = patches.image_dims;
    let side = patches.patch_side;
    let mut sum = vec![0.0; h * w];
    let mut hits = vec![0u32; h * w];
    for (j, &(r0, c0)) in patches.positions.iter().enumerate() {
        let col = patches.column(j);
        for c in 0..side {
            for r in 0..side {
                let idx = (r0 + r) * w + c0 + c;
                sum[idx] += col[c * side + r];
                hits[idx] += 1;
            }
        }
    }
    let pixels = sum
        .iter()
        .zip(&hits)
        .map(|(&s, &k)| {
            if k == 0 {
                0.0
            } else {
                (s / f64::from(k)).clamp(0.0, 255.0)
            }
        })
        .collect();
    GrayImage::new(h, w, pixels).expect("dims match by construction")
}

impl PatchGrid {
    pub fn extract(image: &GrayImage, patch_side: usize, stride: usize) -> Result<Self> {
        let (h, w) = image.dims();
        if patch_side == 0 || stride == 0 {
            return Err(Error::Domain(
                "patch side and stride must be positive".into(),
            ));
        }
        if h < patch_side || w < patch_side {
            return Err(Error::Dimension(format!(
                "{h}x{w} image is smaller than a {patch_side}x{patch_side} patch"
            )));
        }
        let rows = (h - patch_side) / stride + 1;
        let cols = (w - patch_side) / stride + 1;
        let m = patch_side * patch_side;
        let mut positions = Vec::with_capacity(rows * cols);
        let mut data = Vec::with_capacity(rows * cols * m);
        for gr in 0..rows {
            for gc in 0..cols {
                let (r0, c0) = (gr * stride, gc * stride);
                positions.push((r0, c0));
                for c in 0..patch_side {
                    for r in 0..patch_side {
                        data.push(image.get(r0 + r, c0 + c));
                    }
                }
            }
        }
        Ok(Self {
            patch_side,
            stride,
            image_dims: (h, w),
            grid_dims: (rows, cols),
            positions,
            data,
        })
    }

    /// Same layout, different column contents (e.g. patch estimates).
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        if data.len() != self.data.len() {
            return Err(Error::Dimension(format!(
                "expected {} values, got {}",
                self.data.len(),
                data.len()
            )));
        }
        Ok(Self {
            data,
            ..self.clone()
        })
    }

    pub fn patch_side(&self) -> usize {
        self.patch_side
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Patch dimension `m = w^2`.
    pub fn dim(&self) -> usize {
        self.patch_side * self.patch_side
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn image_dims(&self) -> (usize, usize) {
        self.image_dims
    }

    /// Number of patch rows and columns in the lattice.
    pub fn grid_dims(&self) -> (usize, usize) {
        self.grid_dims
    }

    pub fn positions(&self) -> &[(usize, usize)] {
        &self.positions
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        let m = self.dim();
        &self.data[j * m..(j + 1) * m]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim())
    }

    /// Lattice coordinate `(grid_row, grid_col)` of patch `j`.
    #[inline]
    pub fn grid_coord(&self, j: usize) -> (usize, usize) {
        (j / self.grid_dims.1, j % self.grid_dims.1)
    }

    /// Indices of the left, top and top-left neighbours of patch `j`, when present.
    pub fn causal_neighbors(&self, j: usize) -> [Option<usize>; 3] {
        let cols = self.grid_dims.1;
        let (gr, gc) = self.grid_coord(j);
        [
            (gc > 0).then(|| j - 1),
            (gr > 0).then(|| j - cols),
            (gr > 0 && gc > 0).then(|| j - cols - 1),
        ]
    }
}
