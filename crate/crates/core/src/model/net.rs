use crate::error::{Error, Result};
use crate::mask::ProbMap;
use crate::synth::rng::Stream;

pub const HIDDEN_CHANNELS: usize = 8;
const TAPS: usize = 9;

const W1: usize = 0;
const B1: usize = W1 + HIDDEN_CHANNELS * TAPS;
const W2: usize = B1 + HIDDEN_CHANNELS;
const B2: usize = W2 + HIDDEN_CHANNELS * TAPS;
const PARAMS: usize = B2 + 1;

const INIT_TAG: u64 = 0x494e_4954; // "INIT"

/// `conv3x3(1→8) → ReLU → conv3x3(8→1) → sigmoid`, zero-padded "same"
/// convolutions. All weights live in one flat vector:
/// `[w1 (8×9) | b1 (8) | w2 (8×9) | b2 (1)]`, kernels row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyNet {
    params: Vec<f64>,
}

/// Intermediate values kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Activations {
    width: usize,
    height: usize,
    /// Hidden pre-activations, channel-major.
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    pub output: ProbMap,
}

impl Activations {
    /// Hidden pre-activations, channel-major. Used to locate ReLU kinks.
    pub fn hidden_pre(&self) -> &[f64] {
        &self.hidden_pre
    }
}

impl TinyNet {
    pub const PARAM_COUNT: usize = PARAMS;

    pub fn zeros() -> Self {
        Self {
            params: vec![0.0; PARAMS],
        }
    }

    /// He-scaled uniform kernels, `U(-√(6/fan_in), √(6/fan_in))`, zero biases.
    pub fn init(seed: u64) -> Self {
        let mut rng = Stream::derived(seed, &[INIT_TAG]);
        let mut params = vec![0.0; PARAMS];
        let bound1 = (6.0 / TAPS as f64).sqrt();
        let bound2 = (6.0 / (TAPS * HIDDEN_CHANNELS) as f64).sqrt();
        for w in &mut params[W1..B1] {
            *w = rng.uniform_in(-bound1, bound1);
        }
        for w in &mut params[W2..B2] {
            *w = rng.uniform_in(-bound2, bound2);
        }
        Self { params }
    }

    pub fn from_params(params: Vec<f64>) -> Result<Self> {
        if params.len() != PARAMS {
            return Err(Error::Contract(format!(
                "expected {PARAMS} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Contract("non-finite network weight".into()));
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, image: &ProbMap) -> ProbMap {
        self.forward_trace(image).output
    }

    pub fn forward_trace(&self, image: &ProbMap) -> Activations {
        let (w, h) = image.dims();
        let n = w * h;
        let px = image.values();
        let mut hidden_pre = vec![0.0; HIDDEN_CHANNELS * n];
        for (c, plane) in hidden_pre.chunks_exact_mut(n).enumerate() {
            plane.fill(self.params[B1 + c]);
            for (k, &weight) in self.kernel1(c).iter().enumerate() {
                shift_add(plane, px, weight, w, h, k);
            }
        }
        let hidden: Vec<f64> = hidden_pre.iter().map(|&z| z.max(0.0)).collect();
        let mut logits = vec![self.params[B2]; n];
        for (c, plane) in hidden.chunks_exact(n).enumerate() {
            for (k, &weight) in self.kernel2(c).iter().enumerate() {
                shift_add(&mut logits, plane, weight, w, h, k);
            }
        }
        let probs = logits.into_iter().map(sigmoid).collect();
        Activations {
            width: w,
            height: h,
            hidden_pre,
            hidden,
            output: ProbMap::new(w, h, probs).expect("sigmoid output lies in [0, 1]"),
        }
    }

    /// Gradient of the loss with respect to every parameter, given
    /// `∂loss/∂p_i` for each output pixel.
    pub fn backward(
        &self,
        image: &ProbMap,
        acts: &Activations,
        upstream: &[f64],
    ) -> Result<Vec<f64>> {
        let (w, h) = (acts.width, acts.height);
        let n = w * h;
        if image.dims() != (w, h) {
            return Err(Error::DimensionMismatch {
                expected: (w, h),
                found: image.dims(),
            });
        }
        if upstream.len() != n {
            return Err(Error::Contract(format!(
                "upstream gradient has {} entries for {n} pixels",
                upstream.len()
            )));
        }
        let mut grads = vec![0.0; PARAMS];

        let d_logits: Vec<f64> = upstream
            .iter()
            .zip(acts.output.values())
            .map(|(&u, &p)| u * p * (1.0 - p))
            .collect();
        grads[B2] = d_logits.iter().sum();

        let mut d_hidden = vec![0.0; n];
        for c in 0..HIDDEN_CHANNELS {
            let plane = &acts.hidden[c * n..(c + 1) * n];
            d_hidden.fill(0.0);
            for k in 0..TAPS {
                grads[W2 + c * TAPS + k] = shift_dot(&d_logits, plane, w, h, k);
                // transpose of shift_add: scatter back along the mirrored tap
                shift_add(
                    &mut d_hidden,
                    &d_logits,
                    self.params[W2 + c * TAPS + k],
                    w,
                    h,
                    TAPS - 1 - k,
                );
            }
            let pre = &acts.hidden_pre[c * n..(c + 1) * n];
            for (d, &z) in d_hidden.iter_mut().zip(pre) {
                if z <= 0.0 {
                    *d = 0.0;
                }
            }
            grads[B1 + c] = d_hidden.iter().sum();
            for k in 0..TAPS {
                grads[W1 + c * TAPS + k] = shift_dot(&d_hidden, image.values(), w, h, k);
            }
        }
        Ok(grads)
    }

    /// Second-layer kernels and bias.
    pub fn output_layer_mut(&mut self) -> &mut [f64] {
        &mut self.params[W2..]
    }

    fn kernel1(&self, c: usize) -> &[f64] {
        &self.params[W1 + c * TAPS..W1 + (c + 1) * TAPS]
    }

    fn kernel2(&self, c: usize) -> &[f64] {
        &self.params[W2 + c * TAPS..W2 + (c + 1) * TAPS]
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Row and column offsets of kernel tap `k`.
fn tap_offset(k: usize) -> (isize, isize) {
    ((k / 3) as isize - 1, (k % 3) as isize - 1)
}

/// Inclusive-exclusive range of `i` with `0 <= i + d < len`.
fn valid_range(len: usize, d: isize) -> std::ops::Range<usize> {
    let lo = (-d).max(0) as usize;
    let hi = (len as isize - d.max(0)).max(lo as isize) as usize;
    lo..hi
}

/// `out[y][x] += weight · input[y + dy][x + dx]` wherever the source is in bounds.
fn shift_add(out: &mut [f64], input: &[f64], weight: f64, w: usize, h: usize, k: usize) {
    if weight == 0.0 {
        return;
    }
    let (dy, dx) = tap_offset(k);
    let xs = valid_range(w, dx);
    for y in valid_range(h, dy) {
        let src_row = (y as isize + dy) as usize * w;
        let dst = &mut out[y * w + xs.start..y * w + xs.end];
        let src = &input[(src_row as isize + xs.start as isize + dx) as usize..][..dst.len()];
        for (o, &i) in dst.iter_mut().zip(src) {
            *o += weight * i;
        }
    }
}

/// `Σ a[y][x] · b[y + dy][x + dx]` over in-bounds positions.
fn shift_dot(a: &[f64], b: &[f64], w: usize, h: usize, k: usize) -> f64 {
    let (dy, dx) = tap_offset(k);
    let xs = valid_range(w, dx);
    let mut acc = 0.0;
    for y in valid_range(h, dy) {
        let src_row = (y as isize + dy) as usize * w;
        let ra = &a[y * w + xs.start..y * w + xs.end];
        let rb = &b[(src_row as isize + xs.start as isize + dx) as usize..][..ra.len()];
        acc += ra.iter().zip(rb).map(|(x, y)| x * y).sum::<f64>();
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(w: usize, h: usize, seed: u64) -> ProbMap {
        let mut rng = Stream::new(seed);
        ProbMap::new(w, h, (0..w * h).map(|_| rng.uniform()).collect()).unwrap()
    }

    /// Direct same-padded cross-correlation, written independently of shift_add.
    fn naive_forward(net: &TinyNet, img: &ProbMap) -> Vec<f64> {
        let (w, h) = img.dims();
        let at = |plane: &[f64], y: isize, x: isize| {
            if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
                0.0
            } else {
                plane[y as usize * w + x as usize]
            }
        };
        let p = net.params();
        let mut hidden = vec![vec![0.0; w * h]; HIDDEN_CHANNELS];
        for c in 0..HIDDEN_CHANNELS {
            for y in 0..h as isize {
                for x in 0..w as isize {
                    let mut z = p[B1 + c];
                    for ky in 0..3 {
                        for kx in 0..3 {
                            z += p[W1 + c * 9 + ky * 3 + kx]
                                * at(img.values(), y + ky as isize - 1, x + kx as isize - 1);
                        }
                    }
                    hidden[c][y as usize * w + x as usize] = z.max(0.0);
                }
            }
        }
        let mut out = vec![0.0; w * h];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut z = p[B2];
                for (c, plane) in hidden.iter().enumerate() {
                    for ky in 0..3 {
                        for kx in 0..3 {
                            z += p[W2 + c * 9 + ky * 3 + kx]
                                * at(plane, y + ky as isize - 1, x + kx as isize - 1);
                        }
                    }
                }
                out[y as usize * w + x as usize] = 1.0 / (1.0 + (-z).exp());
            }
        }
        out
    }

    #[test]
    fn zero_net_outputs_half() {
        let out = TinyNet::zeros().forward(&image(5, 4, 1));
        assert_eq!(out.dims(), (5, 4));
        assert!(out.values().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn forward_matches_naive_convolution() {
        let net = TinyNet::init(3);
        let img = image(7, 5, 2);
        let fast = net.forward(&img);
        for (a, b) in fast.values().iter().zip(naive_forward(&net, &img)) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let net = TinyNet::init(4);
        let img = image(6, 6, 5);
        let acts = net.forward_trace(&img);
        let g = net.backward(&img, &acts, &[0.0; 36]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_is_linear_in_upstream() {
        let net = TinyNet::init(4);
        let img = image(6, 6, 5);
        let acts = net.forward_trace(&img);
        let up: Vec<f64> = (0..36).map(|i| (i as f64 * 0.37).sin()).collect();
        let doubled: Vec<f64> = up.iter().map(|u| 2.0 * u).collect();
        let g1 = net.backward(&img, &acts, &up).unwrap();
        let g2 = net.backward(&img, &acts, &doubled).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((2.0 * a - b).abs() <= 1e-14 * b.abs().max(1.0));
        }
    }

    #[test]
    fn backward_checks_shapes() {
        let net = TinyNet::init(4);
        let img = image(6, 6, 5);
        let acts = net.forward_trace(&img);
        assert!(net.backward(&img, &acts, &[0.0; 35]).is_err());
        assert!(net.backward(&image(5, 6, 1), &acts, &[0.0; 36]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences_of_linear_readout() {
        // loss = Σ c_i p_i, so upstream = c
        let net = TinyNet::init(8);
        let img = image(8, 8, 9);
        let coef: Vec<f64> = (0..64).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect();
        let loss = |n: &TinyNet| -> f64 {
            n.forward(&img)
                .values()
                .iter()
                .zip(&coef)
                .map(|(p, c)| p * c)
                .sum()
        };
        let acts = net.forward_trace(&img);
        let analytic = net.backward(&img, &acts, &coef).unwrap();
        let step = 1e-5;
        for (i, &a) in analytic.iter().enumerate() {
            let mut plus = net.clone();
            plus.params_mut()[i] += step;
            let mut minus = net.clone();
            minus.params_mut()[i] -= step;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * step);
            let scale = a.abs().max(numeric.abs()).max(1e-6);
            assert!(
                (a - numeric).abs() / scale < 1e-4,
                "param {i}: {a} vs {numeric}"
            );
        }
    }

    #[test]
    fn init_is_seeded() {
        assert_eq!(TinyNet::init(1), TinyNet::init(1));
        assert_ne!(TinyNet::init(1), TinyNet::init(2));
        assert!(TinyNet::from_params(vec![0.0; 3]).is_err());
    }
}
