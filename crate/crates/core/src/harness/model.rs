//! Small per-pixel MLP used as both student and teacher.
//!
//! Each pixel is described by its colour, the mean colour of a 5×5
//! neighbourhood and its normalised coordinates; one tanh hidden layer maps
//! these to class logits.

use rand::Rng;

use crate::error::{shape_err, EcapError, Result};
use crate::par::Exec;
use crate::tensor::{ImageTensor, OneHotLabel, ProbMap};

pub const NUM_FEATURES: usize = 8;
const WINDOW_RADIUS: usize = 2;

/// Log-probabilities are clamped below at `ln(EPS)`.
pub const EPS: f64 = 1e-12;

/// Per-pixel features, row-major.
pub fn pixel_features(x: &ImageTensor) -> Vec<[f64; NUM_FEATURES]> {
    let (h, w) = x.dims();
    // Integral image with a zero border row/column.
    let mut integral = vec![[0.0f64; 3]; (h + 1) * (w + 1)];
    for r in 0..h {
        for c in 0..w {
            let px = x.pixel(r, c);
            let idx = (r + 1) * (w + 1) + (c + 1);
            for k in 0..3 {
                integral[idx][k] = px[k] as f64 + integral[r * (w + 1) + c + 1][k]
                    + integral[(r + 1) * (w + 1) + c][k]
                    - integral[r * (w + 1) + c][k];
            }
        }
    }
    let yscale = if h > 1 { 2.0 / (h - 1) as f64 } else { 0.0 };
    let xscale = if w > 1 { 2.0 / (w - 1) as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        let (r0, r1) = (r.saturating_sub(WINDOW_RADIUS), (r + WINDOW_RADIUS + 1).min(h));
        for c in 0..w {
            let (c0, c1) = (c.saturating_sub(WINDOW_RADIUS), (c + WINDOW_RADIUS + 1).min(w));
            let area = ((r1 - r0) * (c1 - c0)) as f64;
            let px = x.pixel(r, c);
            let mut f = [0.0; NUM_FEATURES];
            for k in 0..3 {
                let sum = integral[r1 * (w + 1) + c1][k] - integral[r0 * (w + 1) + c1][k]
                    - integral[r1 * (w + 1) + c0][k]
                    + integral[r0 * (w + 1) + c0][k];
                f[k] = 2.0 * px[k] as f64 - 1.0;
                f[3 + k] = 2.0 * sum / area - 1.0;
            }
            f[6] = r as f64 * yscale - 1.0;
            f[7] = c as f64 * xscale - 1.0;
            out.push(f);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelClassifier {
    hidden: usize,
    num_classes: usize,
    params: Vec<f64>,
}

impl PixelClassifier {
    pub fn num_params_for(hidden: usize, num_classes: usize) -> usize {
        hidden * NUM_FEATURES + hidden + num_classes * hidden + num_classes
    }

    pub fn zeros(hidden: usize, num_classes: usize) -> Self {
        Self {
            hidden,
            num_classes,
            params: vec![0.0; Self::num_params_for(hidden, num_classes)],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(hidden: usize, num_classes: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(hidden, num_classes);
        let a1 = (6.0 / (NUM_FEATURES + hidden) as f64).sqrt();
        let a2 = (6.0 / (hidden + num_classes) as f64).sqrt();
        let (w1, rest) = m.params.split_at_mut(hidden * NUM_FEATURES);
        w1.iter_mut().for_each(|v| *v = rng.gen_range(-a1..a1));
        let w2 = &mut rest[hidden..hidden + num_classes * hidden];
        w2.iter_mut().for_each(|v| *v = rng.gen_range(-a2..a2));
        m
    }

    pub fn from_params(hidden: usize, num_classes: usize, params: Vec<f64>) -> Result<Self> {
        let expected = Self::num_params_for(hidden, num_classes);
        if params.len() != expected {
            return Err(shape_err("PixelClassifier::from_params", expected, params.len()));
        }
        Ok(Self {
            hidden,
            num_classes,
            params,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(shape_err("PixelClassifier::set_params", self.params.len(), params.len()));
        }
        self.params = params;
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        if self.params.iter().any(|v| !v.is_finite()) {
            return Err(EcapError::NonFinite("classifier parameters".into()));
        }
        Ok(())
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * NUM_FEATURES;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.num_classes * self.hidden;
        (b1, w2, b2)
    }

    /// Hidden activations and softmax output for one pixel.
    fn pixel_forward(&self, f: &[f64; NUM_FEATURES], hidden: &mut [f64], probs: &mut [f64]) {
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        for (j, hj) in hidden.iter_mut().enumerate() {
            let row = &p[j * NUM_FEATURES..(j + 1) * NUM_FEATURES];
            let a: f64 = row.iter().zip(f).map(|(w, x)| w * x).sum::<f64>() + p[b1 + j];
            *hj = a.tanh();
        }
        let mut max = f64::NEG_INFINITY;
        for (c, z) in probs.iter_mut().enumerate() {
            let row = &p[w2 + c * self.hidden..w2 + (c + 1) * self.hidden];
            *z = row.iter().zip(hidden.iter()).map(|(w, h)| w * h).sum::<f64>() + p[b2 + c];
            max = max.max(*z);
        }
        let mut sum = 0.0;
        for z in probs.iter_mut() {
            *z = (*z - max).exp();
            sum += *z;
        }
        for z in probs.iter_mut() {
            *z /= sum;
        }
    }

    pub fn forward(&self, x: &ImageTensor) -> Result<ProbMap> {
        self.forward_with(x, Exec::default())
    }

    pub fn forward_with(&self, x: &ImageTensor, exec: Exec) -> Result<ProbMap> {
        self.check_finite()?;
        let (h, w) = x.dims();
        let feats = pixel_features(x);
        let c = self.num_classes;
        let rows = exec.map_range(h, |r| {
            let mut hidden = vec![0.0; self.hidden];
            let mut out = vec![0.0; w * c];
            for col in 0..w {
                self.pixel_forward(&feats[r * w + col], &mut hidden, &mut out[col * c..(col + 1) * c]);
            }
            out
        });
        Ok(ProbMap::from_raw_unchecked(h, w, c, rows.concat()))
    }

    /// Forward pass plus the gradient of `−Σ_p q_p log max(ŷ_{p,y_p}, ε)`
    /// with respect to the parameters. Unpopulated label pixels contribute
    /// nothing.
    pub fn forward_backward(
        &self,
        x: &ImageTensor,
        y: &OneHotLabel,
        q: &[f64],
        exec: Exec,
    ) -> Result<(ProbMap, Vec<f64>)> {
        self.check_finite()?;
        let (h, w) = x.dims();
        if y.dims() != (h, w) || q.len() != h * w {
            return Err(shape_err("forward_backward", (h, w), (y.dims(), q.len())));
        }
        if y.num_classes() != self.num_classes {
            return Err(shape_err("forward_backward", self.num_classes, y.num_classes()));
        }
        let feats = pixel_features(x);
        let c = self.num_classes;
        let nh = self.hidden;
        let (b1, w2, b2) = self.offsets();
        let rows = exec.map_range(h, |r| {
            let mut hidden = vec![0.0; nh];
            let mut dhidden = vec![0.0; nh];
            let mut dz = vec![0.0; c];
            let mut out = vec![0.0; w * c];
            let mut grad = vec![0.0; self.params.len()];
            for col in 0..w {
                let p = r * w + col;
                let f = &feats[p];
                let probs = &mut out[col * c..(col + 1) * c];
                self.pixel_forward(f, &mut hidden, probs);
                let Some(target) = y.class_at(p) else { continue };
                if q[p] == 0.0 || probs[target] < EPS {
                    continue;
                }
                for (k, (d, &pk)) in dz.iter_mut().zip(probs.iter()).enumerate() {
                    *d = q[p] * (pk - if k == target { 1.0 } else { 0.0 });
                }
                for j in 0..nh {
                    let mut s = 0.0;
                    for (k, d) in dz.iter().enumerate() {
                        s += self.params[w2 + k * nh + j] * d;
                    }
                    dhidden[j] = s * (1.0 - hidden[j] * hidden[j]);
                }
                for k in 0..c {
                    grad[b2 + k] += dz[k];
                    let g = &mut grad[w2 + k * nh..w2 + (k + 1) * nh];
                    for j in 0..nh {
                        g[j] += dz[k] * hidden[j];
                    }
                }
                for j in 0..nh {
                    grad[b1 + j] += dhidden[j];
                    let g = &mut grad[j * NUM_FEATURES..(j + 1) * NUM_FEATURES];
                    for (gi, fi) in g.iter_mut().zip(f) {
                        *gi += dhidden[j] * fi;
                    }
                }
            }
            (out, grad)
        });
        let mut probs = Vec::with_capacity(h * w * c);
        let mut grad = vec![0.0; self.params.len()];
        for (row_probs, row_grad) in rows {
            probs.extend_from_slice(&row_probs);
            for (g, v) in grad.iter_mut().zip(&row_grad) {
                *g += v;
            }
        }
        Ok((ProbMap::from_raw_unchecked(h, w, c, probs), grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_image(h: usize, w: usize, rng: &mut ChaCha8Rng) -> ImageTensor {
        ImageTensor::new(h, w, (0..h * w * 3).map(|_| rng.gen::<f32>()).collect()).unwrap()
    }

    #[test]
    fn zero_params_give_uniform() {
        let m = PixelClassifier::zeros(6, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = m.forward(&random_image(3, 5, &mut rng)).unwrap();
        assert!(p.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn outputs_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = PixelClassifier::init(12, 5, &mut rng);
        let p = m.forward(&random_image(7, 9, &mut rng)).unwrap();
        for px in p.data().chunks_exact(5) {
            assert!((px.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        ProbMap::new(7, 9, 5, p.data().to_vec()).unwrap();
    }

    #[test]
    fn rejects_non_finite_params() {
        let mut m = PixelClassifier::zeros(4, 3);
        m.params_mut()[0] = f64::NAN;
        let img = ImageTensor::zeros(2, 2);
        assert!(matches!(m.forward(&img), Err(EcapError::NonFinite(_))));
    }

    #[test]
    fn features_are_centered() {
        let img = ImageTensor::filled(4, 6, 0.5).unwrap();
        let f = pixel_features(&img);
        assert!(f.iter().all(|v| v[..6].iter().all(|x| x.abs() < 1e-12)));
        assert_eq!(f[0][6], -1.0);
        assert_eq!(f[23][6], 1.0);
        assert_eq!(f[23][7], 1.0);
    }

    #[test]
    fn backward_probs_match_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = PixelClassifier::init(8, 3, &mut rng);
        let img = random_image(5, 5, &mut rng);
        let y = OneHotLabel::from_classes(5, 5, 3, &vec![Some(1); 25]).unwrap();
        let (p, _) = m.forward_backward(&img, &y, &[1.0; 25], Exec::default()).unwrap();
        assert_eq!(p, m.forward(&img).unwrap());
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_gradient_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = PixelClassifier::init(16, 5, &mut rng);
        let img = random_image(16, 16, &mut rng);
        let classes: Vec<_> = (0..256).map(|i| Some(i % 5)).collect();
        let y = OneHotLabel::from_classes(16, 16, 5, &classes).unwrap();
        let q = vec![0.7; 256];
        let a = m.forward_backward(&img, &y, &q, Exec::Sequential).unwrap();
        let b = m.forward_backward(&img, &y, &q, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
