//! Empirical PCA on function samples under the quadrature inner product.
//! Produces the truncated input/output bases and the linear encoding
//! coefficients consumed by the coefficient-space architectures.

use crate::field::{BoundaryKind, Field, Grid, Metadata};
use crate::opbl::Checkpoint;
use crate::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use std::path::Path;

/// Truncated orthonormal basis with the sample mean and the covariance
/// eigenvalue spectrum. Modes are orthonormal w.r.t. the quadrature inner
/// product, not the Euclidean one.
#[derive(Debug, Clone)]
pub struct PcaBasis {
    pub grid: Grid,
    pub channels: usize,
    /// Sample mean, all zeros for the uncentered variant.
    pub mean: Vec<f64>,
    /// `d` modes stored contiguously; mode `j` occupies
    /// `modes[j * m..(j + 1) * m]` with `m = num_points * channels`.
    pub modes: Vec<f64>,
    /// Covariance eigenvalues, nonincreasing.
    pub spectrum: Vec<f64>,
    pub centered: bool,
}

fn entry_weights(grid: &Grid, channels: usize) -> Vec<f64> {
    let pw = grid.weights();
    let mut w = Vec::with_capacity(pw.len() * channels);
    for v in pw {
        for _ in 0..channels {
            w.push(v);
        }
    }
    w
}

fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// Deterministic sign convention: the entry of largest magnitude is positive.
fn fix_sign(mode: &mut [f64]) {
    let mut best = 0usize;
    for (i, v) in mode.iter().enumerate() {
        if v.abs() > mode[best].abs() {
            best = i;
        }
    }
    if mode[best] < 0.0 {
        for v in mode.iter_mut() {
            *v = -*v;
        }
    }
}

/// Fill a rank-deficient basis with quadrature-orthonormal vectors obtained
/// by Gram-Schmidt on canonical unit vectors, so the orthonormality
/// invariant holds even when the data has fewer than `d` directions.
fn pad_modes(modes: &mut Vec<f64>, have: usize, d: usize, w: &[f64], m: usize) -> Result<()> {
    let mut filled = have;
    let mut cand = 0usize;
    while filled < d {
        if cand >= m {
            return Err(Error::Numeric("failed to complete rank-deficient PCA basis".into()));
        }
        let mut v = vec![0.0; m];
        v[cand] = 1.0;
        cand += 1;
        for j in 0..filled {
            let mode = &modes[j * m..(j + 1) * m];
            let c = weighted_dot(w, mode, &v);
            for (vi, mi) in v.iter_mut().zip(mode) {
                *vi -= c * mi;
            }
        }
        let norm = weighted_dot(w, &v, &v).sqrt();
        if norm < 1e-8 {
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        fix_sign(&mut v);
        modes.extend_from_slice(&v);
        filled += 1;
    }
    Ok(())
}

/// Fit a `d`-mode basis. `centered` subtracts the sample mean first (the
/// default); the uncentered variant keeps the raw second-moment operator.
pub fn fit_pca_with(samples: &[Field], d: usize, centered: bool) -> Result<PcaBasis> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("PCA requires at least one sample".into()))?;
    let grid = first.grid.clone();
    let channels = first.channels;
    for s in samples {
        if !s.same_layout(first) {
            return Err(Error::Mismatch("PCA samples must share grid and channels".into()));
        }
    }
    let n = samples.len();
    let m = grid.num_points() * channels;
    if d > n.min(m) {
        return Err(Error::InvalidArgument(format!(
            "d={d} exceeds min(samples={n}, dofs={m})"
        )));
    }
    let w = entry_weights(&grid, channels);

    let mean: Vec<f64> = if centered {
        let mut acc = vec![0.0; m];
        for s in samples {
            for (a, v) in acc.iter_mut().zip(&s.values) {
                *a += v;
            }
        }
        acc.iter().map(|a| a / n as f64).collect()
    } else {
        vec![0.0; m]
    };
    let deviations: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.values.iter().zip(&mean).map(|(v, mu)| v - mu).collect())
        .collect();

    let mut pairs: Vec<(f64, Vec<f64>)> = if n < m {
        // method of snapshots: eigen-decompose the N x N Gram matrix
        let gram = DMatrix::from_fn(n, n, |i, j| {
            weighted_dot(&w, &deviations[i], &deviations[j]) / n as f64
        });
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let lam_max = eig.eigenvalues[order[0]].max(0.0);
        order
            .iter()
            .take(d)
            .map(|&idx| {
                let lam = eig.eigenvalues[idx].max(0.0);
                if lam <= 1e-12 * lam_max.max(1e-300) || lam == 0.0 {
                    return (lam.max(0.0), Vec::new());
                }
                let scale = 1.0 / (n as f64 * lam).sqrt();
                let mut mode = vec![0.0; m];
                for (i, dev) in deviations.iter().enumerate() {
                    let c = eig.eigenvectors[(i, idx)] * scale;
                    for (mo, dv) in mode.iter_mut().zip(dev) {
                        *mo += c * dv;
                    }
                }
                (lam, mode)
            })
            .collect()
    } else {
        // direct path: symmetrize with W^(1/2) and eigen-decompose M x M
        let ws: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
        let mut b: DMatrix<f64> = DMatrix::zeros(m, m);
        for dev in &deviations {
            for i in 0..m {
                let yi = dev[i] * ws[i];
                for j in 0..m {
                    b[(i, j)] += yi * dev[j] * ws[j] / n as f64;
                }
            }
        }
        let eig = SymmetricEigen::new(b);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let lam_max = eig.eigenvalues[order[0]].max(0.0);
        order
            .iter()
            .take(d)
            .map(|&idx| {
                let lam = eig.eigenvalues[idx].max(0.0);
                if lam <= 1e-12 * lam_max.max(1e-300) || lam == 0.0 {
                    return (lam.max(0.0), Vec::new());
                }
                let mode: Vec<f64> = (0..m).map(|i| eig.eigenvectors[(i, idx)] / ws[i]).collect();
                (lam, mode)
            })
            .collect()
    };

    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut spectrum = Vec::with_capacity(d);
    let mut modes = Vec::with_capacity(d * m);
    let mut have = 0usize;
    for (lam, mode) in pairs {
        spectrum.push(lam);
        if !mode.is_empty() {
            let mut mode = mode;
            fix_sign(&mut mode);
            modes.extend_from_slice(&mode);
            have += 1;
        }
    }
    pad_modes(&mut modes, have, d, &w, m)?;

    Ok(PcaBasis {
        grid,
        channels,
        mean,
        modes,
        spectrum,
        centered,
    })
}

/// Fit a centered `d`-mode basis.
pub fn fit_pca(samples: &[Field], d: usize) -> Result<PcaBasis> {
    fit_pca_with(samples, d, true)
}

impl PcaBasis {
    pub fn d(&self) -> usize {
        self.spectrum.len()
    }

    fn dofs(&self) -> usize {
        self.grid.num_points() * self.channels
    }

    pub fn mode(&self, j: usize) -> &[f64] {
        let m = self.dofs();
        &self.modes[j * m..(j + 1) * m]
    }

    /// Coefficients of `f - mean` on the modes: `c_j = <mode_j, f - mean>`.
    pub fn project(&self, f: &Field) -> Result<Vec<f64>> {
        if f.grid != self.grid || f.channels != self.channels {
            return Err(Error::Mismatch("field layout differs from basis layout".into()));
        }
        let w = entry_weights(&self.grid, self.channels);
        let dev: Vec<f64> = f.values.iter().zip(&self.mean).map(|(v, mu)| v - mu).collect();
        Ok((0..self.d())
            .map(|j| weighted_dot(&w, self.mode(j), &dev))
            .collect())
    }

    /// Synthesis: `mean + sum_j c_j mode_j`.
    pub fn reconstruct(&self, coeffs: &[f64]) -> Result<Field> {
        if coeffs.len() != self.d() {
            return Err(Error::Mismatch(format!(
                "expected {} coefficients, got {}",
                self.d(),
                coeffs.len()
            )));
        }
        let mut vals = self.mean.clone();
        for (j, c) in coeffs.iter().enumerate() {
            for (v, mo) in vals.iter_mut().zip(self.mode(j)) {
                *v += c * mo;
            }
        }
        Field::new(self.grid.clone(), self.channels, vals)
    }

    /// Verify `modes^T W modes = I` to the given tolerance.
    pub fn orthonormality_defect(&self) -> f64 {
        let w = entry_weights(&self.grid, self.channels);
        let d = self.d();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                let dot = weighted_dot(&w, self.mode(i), self.mode(j));
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut manifest = Metadata::new();
        manifest.set("kind", "pca_basis");
        manifest.set("dims", self.grid.dims());
        manifest.set(
            "points",
            self.grid
                .points()
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        manifest.set(
            "extents",
            self.grid
                .extents()
                .iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        manifest.set(
            "boundaries",
            self.grid
                .boundaries()
                .iter()
                .map(|b| b.as_str().to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        manifest.set("channels", self.channels);
        manifest.set("d", self.d());
        manifest.set("centered", self.centered);
        let mut ck = Checkpoint::new(manifest);
        ck.push("mean", self.mean.clone());
        ck.push("modes", self.modes.clone());
        ck.push("spectrum", self.spectrum.clone());
        ck.write(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ck = Checkpoint::read(path)?;
        let need = |key: &str| -> Result<&str> {
            ck.manifest
                .get(key)
                .ok_or_else(|| Error::Format(format!("basis checkpoint missing '{key}'")))
        };
        if need("kind")? != "pca_basis" {
            return Err(Error::Format("checkpoint is not a PCA basis".into()));
        }
        let dims: usize = need("dims")?
            .parse()
            .map_err(|_| Error::Format("bad dims".into()))?;
        let parse_list = |s: &str| -> Vec<String> { s.split(',').map(|t| t.to_string()).collect() };
        let points: Vec<usize> = parse_list(need("points")?)
            .iter()
            .map(|t| t.parse().map_err(|_| Error::Format("bad points".into())))
            .collect::<Result<_>>()?;
        let extents: Vec<f64> = parse_list(need("extents")?)
            .iter()
            .map(|t| t.parse().map_err(|_| Error::Format("bad extents".into())))
            .collect::<Result<_>>()?;
        let boundaries: Vec<BoundaryKind> = parse_list(need("boundaries")?)
            .iter()
            .map(|t| BoundaryKind::parse(t))
            .collect::<Result<_>>()?;
        let grid = Grid::new(dims, &points, &extents, &boundaries)?;
        let channels: usize = need("channels")?
            .parse()
            .map_err(|_| Error::Format("bad channels".into()))?;
        let centered: bool = need("centered")?
            .parse()
            .map_err(|_| Error::Format("bad centered flag".into()))?;
        let basis = PcaBasis {
            grid,
            channels,
            mean: ck.get("mean")?.to_vec(),
            modes: ck.get("modes")?.to_vec(),
            spectrum: ck.get("spectrum")?.to_vec(),
            centered,
        };
        let m = basis.dofs();
        if basis.mean.len() != m || basis.modes.len() != basis.d() * m {
            return Err(Error::Format("basis checkpoint has inconsistent shapes".into()));
        }
        Ok(basis)
    }
}
