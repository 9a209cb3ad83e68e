//! Synthetic two-class data, RBF kernels, and weight-heterogeneity helpers.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel::{read_kernel_csv, KernelMatrix};
use crate::{Label, Scalar};

/// Two Gaussian clusters whose centers sit `separation` apart along the
/// first axis. Each cluster has standard deviation `noise_scale`, except the
/// last axis, which is stretched by `anisotropy` (the first axis when `dims`
/// is 1).
#[derive(Clone, Debug, PartialEq)]
pub struct BlobSpec {
    pub n_points: usize,
    pub separation: f64,
    pub noise_scale: f64,
    pub anisotropy: f64,
    pub label_noise: f64,
    pub dims: usize,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            n_points: 50,
            separation: 6.0,
            noise_scale: 1.0,
            anisotropy: 1.0,
            label_noise: 0.0,
            dims: 2,
            seed: 0,
        }
    }
}

impl BlobSpec {
    /// `separation / (noise_scale sqrt(dims))`, the map coordinate used for
    /// the normalized margin strength.
    pub fn margin_strength(&self) -> f64 {
        self.separation / (self.noise_scale * (self.dims as f64).sqrt())
    }

    fn check(&self) -> Result<()> {
        if self.n_points < 4 {
            return Err(Error::TooSmall(self.n_points));
        }
        if self.dims == 0 {
            return Err(Error::Domain("dims must be at least 1".into()));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::Domain(format!("noise_scale = {}", self.noise_scale)));
        }
        if !(self.anisotropy >= 1.0 && self.anisotropy.is_finite()) {
            return Err(Error::Domain(format!("anisotropy = {}", self.anisotropy)));
        }
        if !(0.0..=0.5).contains(&self.label_noise) {
            return Err(Error::Domain(format!("label_noise = {}", self.label_noise)));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::Domain(format!("separation = {}", self.separation)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub points: Vec<Vec<T>>,
    pub labels: Vec<Label>,
    /// Cluster membership before label noise.
    pub clusters: Vec<Label>,
}

impl<T: Scalar> Dataset<T> {
    pub fn dims(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// Writes `x_1,...,x_d,y` with a header row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dims()).map(|k| format!("x_{k}")).collect();
        writeln!(w, "{},y", header.join(","))?;
        for (p, y) in self.points.iter().zip(&self.labels) {
            let row: Vec<String> = p.iter().map(|v| format!("{:?}", v.as_f64())).collect();
            writeln!(w, "{},{y}", row.join(","))?;
        }
        Ok(())
    }
}

/// Samples a dataset: the first half of the points belong to the `+1`
/// cluster, the rest to `-1`.
pub fn make_blobs<T: Scalar>(spec: &BlobSpec) -> Result<Dataset<T>> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dims;
    let half = spec.n_points / 2;
    let mut points = Vec::with_capacity(spec.n_points);
    let mut clusters = Vec::with_capacity(spec.n_points);
    let mut labels = Vec::with_capacity(spec.n_points);
    for i in 0..spec.n_points {
        let y: Label = if i < spec.n_points - half { 1 } else { -1 };
        let center = 0.5 * spec.separation * f64::from(y);
        let p: Vec<T> = (0..d)
            .map(|axis| {
                let z: f64 = StandardNormal.sample(&mut rng);
                let stretch = if axis == d - 1 { spec.anisotropy } else { 1.0 };
                let shift = if axis == 0 { center } else { 0.0 };
                T::lit(shift + spec.noise_scale * stretch * z)
            })
            .collect();
        let flip = spec.label_noise > 0.0 && rng.random::<f64>() < spec.label_noise;
        points.push(p);
        clusters.push(y);
        labels.push(if flip { -y } else { y });
    }
    Ok(Dataset {
        points,
        labels,
        clusters,
    })
}

/// `K_ij = exp(-gamma ||x_i - x_j||^2)`.
pub fn rbf_kernel<T: Scalar>(points: &[Vec<T>], gamma: T) -> Result<KernelMatrix<T>> {
    if !(gamma > T::zero()) {
        return Err(Error::Domain(format!("gamma = {gamma} must be positive")));
    }
    let n = points.len();
    let mut k = KernelMatrix::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            let d2: T = points[i]
                .iter()
                .zip(&points[j])
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            k.set_symmetric(i, j, (-gamma * d2).exp());
        }
    }
    Ok(k)
}

/// `1 / (d * var)`, with the variance taken over every coordinate of every
/// point pooled together.
pub fn default_gamma<T: Scalar>(points: &[Vec<T>]) -> Result<T> {
    let d = points.first().map_or(0, Vec::len);
    let count = points.len() * d;
    if count == 0 {
        return Err(Error::Domain("no coordinates to scale".into()));
    }
    let all = || points.iter().flatten().map(|v| v.as_f64());
    let mean = all().sum::<f64>() / count as f64;
    let var = all().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
    if !(var > 0.0) {
        return Err(Error::Domain("points have zero variance".into()));
    }
    Ok(T::lit(1.0 / (d as f64 * var)))
}

fn mean<T: Scalar>(w: &[T]) -> Result<T> {
    let m = if w.is_empty() {
        T::zero()
    } else {
        w.iter().copied().sum::<T>() / T::lit(w.len() as f64)
    };
    if !(m > T::zero()) {
        return Err(Error::Domain("weights need a positive mean".into()));
    }
    Ok(m)
}

/// `(1 - t) mean(base) + t base`: constant at `t = 0`, `base` at `t = 1`,
/// same mean throughout.
pub fn interpolate_weights<T: Scalar>(base: &[T], t: T) -> Result<Vec<T>> {
    if !(t >= T::zero() && t <= T::one()) {
        return Err(Error::Domain(format!("t = {t} is outside [0, 1]")));
    }
    let m = mean(base)?;
    Ok(base.iter().map(|&b| (T::one() - t) * m + t * b).collect())
}

/// Population standard deviation over the mean.
pub fn coefficient_of_variation<T: Scalar>(w: &[T]) -> Result<T> {
    let m = mean(w)?;
    let var = w.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::lit(w.len() as f64);
    Ok(var.sqrt() / m)
}

/// Reads and validates a kernel file. Any violation, including a minimum
/// eigenvalue below `-psd_tol`, is an error.
pub fn load_kernel_file<T: Scalar>(
    path: impl AsRef<Path>,
    psd_tol: T,
) -> Result<(KernelMatrix<T>, Option<Vec<Label>>)> {
    let file = std::fs::File::open(path)?;
    let (k, labels) = read_kernel_csv(std::io::BufReader::new(file))?;
    let report = k.validate(psd_tol);
    if !report.is_valid() {
        return Err(Error::InvalidKernel(report));
    }
    Ok((k, labels))
}
