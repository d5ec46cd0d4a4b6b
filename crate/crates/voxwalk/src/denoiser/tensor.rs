//! Minimal dense 3D volume tensor plus the conv/SiLU/upsample primitives the
//! denoiser is built from, with hand-written reverse-mode gradients.
//!
//! All math is f64. Inner loops run along the contiguous z axis so the
//! compiler can vectorize them; parallelism splits over independent output
//! channels, which keeps results bit-deterministic under any schedule.

/// A [channels, l, l, l] cube of f64 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Vol {
    pub channels: usize,
    pub side: usize,
    pub data: Vec<f64>,
}

impl Vol {
    pub fn zeros(channels: usize, side: usize) -> Vol {
        Vol {
            channels,
            side,
            data: vec![0.0; channels * side * side * side],
        }
    }

    pub fn from_f32(channels: usize, side: usize, data: &[f32]) -> Vol {
        debug_assert_eq!(data.len(), channels * side * side * side);
        Vol {
            channels,
            side,
            data: data.iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&v| v as f32).collect()
    }

    pub fn voxels_per_channel(&self) -> usize {
        self.side * self.side * self.side
    }

    #[inline]
    pub fn idx(&self, c: usize, x: usize, y: usize, z: usize) -> usize {
        ((c * self.side + x) * self.side + y) * self.side + z
    }

    pub fn add_assign(&mut self, other: &Vol) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// One 3x3x3 convolution layer: weights [cout, cin, 3, 3, 3] and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3 {
    pub cin: usize,
    pub cout: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// Gradients of a `Conv3`, same layout.
#[derive(Debug, Clone)]
pub struct Conv3Grad {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Conv3 {
    pub fn zeros(cin: usize, cout: usize) -> Conv3 {
        Conv3 {
            cin,
            cout,
            w: vec![0.0; cout * cin * 27],
            b: vec![0.0; cout],
        }
    }

    pub fn grad_zeros(&self) -> Conv3Grad {
        Conv3Grad {
            w: vec![0.0; self.w.len()],
            b: vec![0.0; self.b.len()],
        }
    }

    #[inline]
    fn widx(&self, co: usize, ci: usize, kx: usize, ky: usize, kz: usize) -> usize {
        (((co * self.cin + ci) * 3 + kx) * 3 + ky) * 3 + kz
    }

    fn out_side(&self, l: usize, stride: usize) -> usize {
        match stride {
            1 => l,
            2 => l / 2,
            _ => panic!("unsupported stride {stride}"),
        }
    }

    /// Padded convolution (padding 1), stride 1 or 2.
    pub fn forward(&self, input: &Vol, stride: usize) -> Vol {
        debug_assert_eq!(input.channels, self.cin);
        let l = input.side;
        let lo = self.out_side(l, stride);
        let vo = lo * lo * lo;
        let mut out = Vol::zeros(self.cout, lo);

        let run = |(co, chunk): (usize, &mut [f64])| {
            chunk.fill(self.b[co]);
            for ci in 0..self.cin {
                let inb = &input.data[ci * l * l * l..(ci + 1) * l * l * l];
                for kx in 0..3 {
                    for ky in 0..3 {
                        for kz in 0..3 {
                            let w = self.w[self.widx(co, ci, kx, ky, kz)];
                            if w == 0.0 {
                                continue;
                            }
                            if stride == 1 {
                                let x0 = 1usize.saturating_sub(kx);
                                let x1 = (l + 1 - kx).min(l);
                                let z0 = 1usize.saturating_sub(kz);
                                let z1 = (l + 1 - kz).min(l);
                                if z0 >= z1 {
                                    continue;
                                }
                                for x in x0..x1 {
                                    let ix = x + kx - 1;
                                    let y0 = 1usize.saturating_sub(ky);
                                    let y1 = (l + 1 - ky).min(l);
                                    for y in y0..y1 {
                                        let iy = y + ky - 1;
                                        let orow = (x * lo + y) * lo;
                                        let irow = (ix * l + iy) * l + (z0 + kz - 1);
                                        let dst = &mut chunk[orow + z0..orow + z1];
                                        let src = &inb[irow..irow + (z1 - z0)];
                                        for (d, s) in dst.iter_mut().zip(src) {
                                            *d += w * s;
                                        }
                                    }
                                }
                            } else {
                                for x in 0..lo {
                                    let ix = (2 * x + kx) as isize - 1;
                                    if ix < 0 || ix as usize >= l {
                                        continue;
                                    }
                                    for y in 0..lo {
                                        let iy = (2 * y + ky) as isize - 1;
                                        if iy < 0 || iy as usize >= l {
                                            continue;
                                        }
                                        let orow = (x * lo + y) * lo;
                                        let irow = (ix as usize * l + iy as usize) * l;
                                        for z in 0..lo {
                                            let iz = (2 * z + kz) as isize - 1;
                                            if iz < 0 || iz as usize >= l {
                                                continue;
                                            }
                                            chunk[orow + z] += w * inb[irow + iz as usize];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        };

        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            out.data.par_chunks_mut(vo).enumerate().for_each(run);
        }
        #[cfg(not(feature = "parallel"))]
        {
            out.data.chunks_mut(vo).enumerate().for_each(run);
        }
        out
    }

    /// Reverse-mode: returns the input gradient and accumulates parameter
    /// gradients into `grad`.
    pub fn backward(
        &self,
        input: &Vol,
        grad_out: &Vol,
        stride: usize,
        grad: &mut Conv3Grad,
    ) -> Vol {
        debug_assert_eq!(input.channels, self.cin);
        debug_assert_eq!(grad_out.channels, self.cout);
        let l = input.side;
        let lo = self.out_side(l, stride);
        debug_assert_eq!(grad_out.side, lo);
        let vi = l * l * l;
        let vo = lo * lo * lo;

        for co in 0..self.cout {
            let g = &grad_out.data[co * vo..(co + 1) * vo];
            grad.b[co] += g.iter().sum::<f64>();
        }

        // weight gradients, parallel over output channels
        let gw_run = |(co, gw_chunk): (usize, &mut [f64])| {
            let gout = &grad_out.data[co * vo..(co + 1) * vo];
            for ci in 0..self.cin {
                let inb = &input.data[ci * vi..(ci + 1) * vi];
                for kx in 0..3 {
                    for ky in 0..3 {
                        for kz in 0..3 {
                            let mut acc = 0.0f64;
                            if stride == 1 {
                                let x0 = 1usize.saturating_sub(kx);
                                let x1 = (l + 1 - kx).min(l);
                                let z0 = 1usize.saturating_sub(kz);
                                let z1 = (l + 1 - kz).min(l);
                                if z0 < z1 {
                                    for x in x0..x1 {
                                        let ix = x + kx - 1;
                                        let y0 = 1usize.saturating_sub(ky);
                                        let y1 = (l + 1 - ky).min(l);
                                        for y in y0..y1 {
                                            let iy = y + ky - 1;
                                            let orow = (x * lo + y) * lo;
                                            let irow = (ix * l + iy) * l + (z0 + kz - 1);
                                            let gs = &gout[orow + z0..orow + z1];
                                            let is = &inb[irow..irow + (z1 - z0)];
                                            for (a, b) in gs.iter().zip(is) {
                                                acc += a * b;
                                            }
                                        }
                                    }
                                }
                            } else {
                                for x in 0..lo {
                                    let ix = (2 * x + kx) as isize - 1;
                                    if ix < 0 || ix as usize >= l {
                                        continue;
                                    }
                                    for y in 0..lo {
                                        let iy = (2 * y + ky) as isize - 1;
                                        if iy < 0 || iy as usize >= l {
                                            continue;
                                        }
                                        let orow = (x * lo + y) * lo;
                                        let irow = (ix as usize * l + iy as usize) * l;
                                        for z in 0..lo {
                                            let iz = (2 * z + kz) as isize - 1;
                                            if iz < 0 || iz as usize >= l {
                                                continue;
                                            }
                                            acc += gout[orow + z] * inb[irow + iz as usize];
                                        }
                                    }
                                }
                            }
                            gw_chunk[((ci * 3 + kx) * 3 + ky) * 3 + kz] += acc;
                        }
                    }
                }
            }
        };

        let per_co = self.cin * 27;
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            grad.w.par_chunks_mut(per_co).enumerate().for_each(gw_run);
        }
        #[cfg(not(feature = "parallel"))]
        {
            grad.w.chunks_mut(per_co).enumerate().for_each(gw_run);
        }

        // input gradients, parallel over input channels
        let mut gin = Vol::zeros(self.cin, l);
        let gin_run = |(ci, chunk): (usize, &mut [f64])| {
            for co in 0..self.cout {
                let gout = &grad_out.data[co * vo..(co + 1) * vo];
                for kx in 0..3 {
                    for ky in 0..3 {
                        for kz in 0..3 {
                            let w = self.w[self.widx(co, ci, kx, ky, kz)];
                            if w == 0.0 {
                                continue;
                            }
                            if stride == 1 {
                                let x0 = 1usize.saturating_sub(kx);
                                let x1 = (l + 1 - kx).min(l);
                                let z0 = 1usize.saturating_sub(kz);
                                let z1 = (l + 1 - kz).min(l);
                                if z0 >= z1 {
                                    continue;
                                }
                                for x in x0..x1 {
                                    let ix = x + kx - 1;
                                    let y0 = 1usize.saturating_sub(ky);
                                    let y1 = (l + 1 - ky).min(l);
                                    for y in y0..y1 {
                                        let iy = y + ky - 1;
                                        let orow = (x * lo + y) * lo;
                                        let irow = (ix * l + iy) * l + (z0 + kz - 1);
                                        let gs = &gout[orow + z0..orow + z1];
                                        let dst = &mut chunk[irow..irow + (z1 - z0)];
                                        for (d, s) in dst.iter_mut().zip(gs) {
                                            *d += w * s;
                                        }
                                    }
                                }
                            } else {
                                for x in 0..lo {
                                    let ix = (2 * x + kx) as isize - 1;
                                    if ix < 0 || ix as usize >= l {
                                        continue;
                                    }
                                    for y in 0..lo {
                                        let iy = (2 * y + ky) as isize - 1;
                                        if iy < 0 || iy as usize >= l {
                                            continue;
                                        }
                                        let orow = (x * lo + y) * lo;
                                        let irow = (ix as usize * l + iy as usize) * l;
                                        for z in 0..lo {
                                            let iz = (2 * z + kz) as isize - 1;
                                            if iz < 0 || iz as usize >= l {
                                                continue;
                                            }
                                            chunk[irow + iz as usize] += w * gout[orow + z];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        };

        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            gin.data.par_chunks_mut(vi).enumerate().for_each(gin_run);
        }
        #[cfg(not(feature = "parallel"))]
        {
            gin.data.chunks_mut(vi).enumerate().for_each(gin_run);
        }
        gin
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// SiLU activation x * sigmoid(x), elementwise.
pub fn silu(input: &Vol) -> Vol {
    Vol {
        channels: input.channels,
        side: input.side,
        data: input.data.iter().map(|&x| x * sigmoid(x)).collect(),
    }
}

/// Gradient of SiLU with respect to its pre-activation input.
pub fn silu_backward(pre: &Vol, grad_out: &Vol) -> Vol {
    let data = pre
        .data
        .iter()
        .zip(&grad_out.data)
        .map(|(&x, &g)| {
            let s = sigmoid(x);
            g * (s * (1.0 + x * (1.0 - s)))
        })
        .collect();
    Vol {
        channels: pre.channels,
        side: pre.side,
        data,
    }
}

/// Nearest-neighbor 2x upsampling.
pub fn upsample2(input: &Vol) -> Vol {
    let l = input.side;
    let lo = l * 2;
    let mut out = Vol::zeros(input.channels, lo);
    for c in 0..input.channels {
        for x in 0..lo {
            for y in 0..lo {
                let irow = ((c * l + x / 2) * l + y / 2) * l;
                let orow = ((c * lo + x) * lo + y) * lo;
                for z in 0..lo {
                    out.data[orow + z] = input.data[irow + z / 2];
                }
            }
        }
    }
    out
}

/// Reverse of `upsample2`: each input cell receives the sum over its 8 children.
pub fn upsample2_backward(grad_out: &Vol) -> Vol {
    let lo = grad_out.side;
    let l = lo / 2;
    let mut gin = Vol::zeros(grad_out.channels, l);
    for c in 0..grad_out.channels {
        for x in 0..lo {
            for y in 0..lo {
                let orow = ((c * lo + x) * lo + y) * lo;
                let irow = ((c * l + x / 2) * l + y / 2) * l;
                for z in 0..lo {
                    gin.data[irow + z / 2] += grad_out.data[orow + z];
                }
            }
        }
    }
    gin
}
