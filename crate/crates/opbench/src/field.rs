//! Grids, sampled fields, quadrature inner products, and the dataset container.
//!
//! All other modules build on these types. Fields are stored as flat `f64`
//! arrays, row-major over grid points with the last grid dimension fastest,
//! and interleaved channels per point.

use crate::{Error, Result};

/// Boundary treatment of one grid dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Periodic,
    Neumann,
}

impl BoundaryKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryKind::Periodic => "periodic",
            BoundaryKind::Neumann => "neumann",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(BoundaryKind::Periodic),
            "neumann" => Ok(BoundaryKind::Neumann),
            other => Err(Error::InvalidArgument(format!(
                "unknown boundary kind '{other}'"
            ))),
        }
    }
}

/// A uniform tensor-product grid in 1 or 2 dimensions.
///
/// Periodic dimensions omit the right endpoint (spacing = extent / points);
/// Neumann dimensions include both endpoints (spacing = extent / (points - 1)).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: usize,
    points: Vec<usize>,
    extents: Vec<f64>,
    boundaries: Vec<BoundaryKind>,
}

impl Grid {
    pub fn new(
        dims: usize,
        points: &[usize],
        extents: &[f64],
        boundaries: &[BoundaryKind],
    ) -> Result<Self> {
        if dims != 1 && dims != 2 {
            return Err(Error::InvalidGrid(format!("dims must be 1 or 2, got {dims}")));
        }
        if points.len() != dims || extents.len() != dims || boundaries.len() != dims {
            return Err(Error::InvalidGrid(format!(
                "expected {dims} entries per-dim, got points={}, extents={}, boundaries={}",
                points.len(),
                extents.len(),
                boundaries.len()
            )));
        }
        for &p in points {
            if p < 2 {
                return Err(Error::InvalidGrid(format!("points_per_dim must be >= 2, got {p}")));
            }
        }
        for &e in extents {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::InvalidGrid(format!("extent must be positive, got {e}")));
            }
        }
        Ok(Grid {
            dims,
            points: points.to_vec(),
            extents: extents.to_vec(),
            boundaries: boundaries.to_vec(),
        })
    }

    /// 1-D periodic grid on [0, extent).
    pub fn periodic_1d(points: usize, extent: f64) -> Result<Self> {
        Grid::new(1, &[points], &[extent], &[BoundaryKind::Periodic])
    }

    /// Square 2-D periodic grid on [0, extent)^2.
    pub fn periodic_2d(points: usize, extent: f64) -> Result<Self> {
        Grid::new(
            2,
            &[points, points],
            &[extent, extent],
            &[BoundaryKind::Periodic, BoundaryKind::Periodic],
        )
    }

    /// Square 2-D Neumann grid on [0, extent]^2 (endpoints included).
    pub fn neumann_2d(points: usize, extent: f64) -> Result<Self> {
        Grid::new(
            2,
            &[points, points],
            &[extent, extent],
            &[BoundaryKind::Neumann, BoundaryKind::Neumann],
        )
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn boundaries(&self) -> &[BoundaryKind] {
        &self.boundaries
    }

    pub fn is_periodic(&self) -> bool {
        self.boundaries.iter().all(|b| *b == BoundaryKind::Periodic)
    }

    /// Grid spacing along dimension `dim`.
    pub fn spacing(&self, dim: usize) -> f64 {
        match self.boundaries[dim] {
            BoundaryKind::Periodic => self.extents[dim] / self.points[dim] as f64,
            BoundaryKind::Neumann => self.extents[dim] / (self.points[dim] - 1) as f64,
        }
    }

    /// Total number of grid points N_p.
    pub fn num_points(&self) -> usize {
        self.points.iter().product()
    }

    /// Coordinates of the point at linear index `idx` (last dimension fastest).
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dims];
        let mut rem = idx;
        for d in (0..self.dims).rev() {
            let i = rem % self.points[d];
            rem /= self.points[d];
            out[d] = i as f64 * self.spacing(d);
        }
        out
    }

    /// Quadrature weight of the point at linear index `idx`.
    ///
    /// Uniform cell weights on periodic dims, trapezoidal on Neumann dims.
    pub fn weight(&self, idx: usize) -> f64 {
        let mut w = 1.0;
        let mut rem = idx;
        for d in (0..self.dims).rev() {
            let i = rem % self.points[d];
            rem /= self.points[d];
            let h = self.spacing(d);
            let factor = match self.boundaries[d] {
                BoundaryKind::Periodic => 1.0,
                BoundaryKind::Neumann => {
                    if i == 0 || i == self.points[d] - 1 {
                        0.5
                    } else {
                        1.0
                    }
                }
            };
            w *= h * factor;
        }
        w
    }

    /// All quadrature weights, indexed by linear point index.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.num_points()).map(|i| self.weight(i)).collect()
    }

    /// Measure of the domain (product of extents).
    pub fn domain_measure(&self) -> f64 {
        self.extents.iter().product()
    }

    /// Record the grid under `<prefix>_dims/points/extents/boundaries` keys.
    pub fn to_metadata(&self, prefix: &str, meta: &mut Metadata) {
        meta.set(&format!("{prefix}_dims"), self.dims);
        let join =
            |it: Vec<String>| -> String { it.join(",") };
        meta.set(
            &format!("{prefix}_points"),
            join(self.points.iter().map(|p| p.to_string()).collect()),
        );
        meta.set(
            &format!("{prefix}_extents"),
            join(self.extents.iter().map(|e| e.to_string()).collect()),
        );
        meta.set(
            &format!("{prefix}_boundaries"),
            join(self.boundaries.iter().map(|b| b.as_str().to_string()).collect()),
        );
    }

    /// Rebuild a grid recorded by [`Grid::to_metadata`].
    pub fn from_metadata(prefix: &str, meta: &Metadata) -> Result<Self> {
        let need = |key: String| -> Result<&str> {
            meta.get(&key)
                .ok_or_else(|| Error::Format(format!("metadata missing '{key}'")))
        };
        let dims: usize = need(format!("{prefix}_dims"))?
            .parse()
            .map_err(|_| Error::Format("bad grid dims".into()))?;
        let points: Vec<usize> = need(format!("{prefix}_points"))?
            .split(',')
            .map(|t| t.parse().map_err(|_| Error::Format("bad grid points".into())))
            .collect::<Result<_>>()?;
        let extents: Vec<f64> = need(format!("{prefix}_extents"))?
            .split(',')
            .map(|t| t.parse().map_err(|_| Error::Format("bad grid extents".into())))
            .collect::<Result<_>>()?;
        let boundaries: Vec<BoundaryKind> = need(format!("{prefix}_boundaries"))?
            .split(',')
            .map(BoundaryKind::parse)
            .collect::<Result<_>>()?;
        Grid::new(dims, &points, &extents, &boundaries)
    }
}

/// A function sampled on a grid: `values[p * channels + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, channels: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidArgument("channels must be positive".into()));
        }
        if values.len() != grid.num_points() * channels {
            return Err(Error::Mismatch(format!(
                "values length {} != N_p * channels = {}",
                values.len(),
                grid.num_points() * channels
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("field contains non-finite values".into()));
        }
        Ok(Field {
            grid,
            channels,
            values,
        })
    }

    pub fn zeros(grid: Grid, channels: usize) -> Self {
        let n = grid.num_points() * channels;
        Field {
            grid,
            channels,
            values: vec![0.0; n],
        }
    }

    pub fn constant(grid: Grid, channels: usize, value: f64) -> Self {
        let n = grid.num_points() * channels;
        Field {
            grid,
            channels,
            values: vec![value; n],
        }
    }

    /// Build a scalar field by evaluating `f` at every grid point.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.num_points())
            .map(|i| f(&grid.coords(i)))
            .collect();
        Field {
            grid,
            channels: 1,
            values,
        }
    }

    pub fn value(&self, point: usize, channel: usize) -> f64 {
        self.values[point * self.channels + channel]
    }

    pub fn same_layout(&self, other: &Field) -> bool {
        self.grid == other.grid && self.channels == other.channels
    }

    /// Quadrature-weighted spatial mean over all channels.
    pub fn mean(&self) -> f64 {
        let w = self.grid.weights();
        let total: f64 = w.iter().sum::<f64>() * self.channels as f64;
        let mut acc = 0.0;
        for p in 0..self.grid.num_points() {
            for c in 0..self.channels {
                acc += w[p] * self.value(p, c);
            }
        }
        acc / total
    }
}

/// Quadrature approximation of the L2(D) inner product.
pub fn l2_inner(f: &Field, g: &Field) -> Result<f64> {
    if !f.same_layout(g) {
        return Err(Error::Mismatch(
            "inner product requires matching grid and channels".into(),
        ));
    }
    let np = f.grid.num_points();
    let mut acc = 0.0;
    for p in 0..np {
        let w = f.grid.weight(p);
        let mut dot = 0.0;
        for c in 0..f.channels {
            dot += f.value(p, c) * g.value(p, c);
        }
        acc += w * dot;
    }
    Ok(acc)
}

/// Quadrature L2 norm.
pub fn l2_norm(f: &Field) -> f64 {
    l2_inner(f, f).expect("field matches itself").sqrt()
}

/// Relative L2 error ||pred - truth|| / ||truth||.
pub fn relative_l2_error(pred: &Field, truth: &Field) -> Result<f64> {
    if !pred.same_layout(truth) {
        return Err(Error::Mismatch(
            "relative error requires matching grid and channels".into(),
        ));
    }
    let denom = l2_norm(truth);
    if denom == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let mut acc = 0.0;
    for p in 0..truth.grid.num_points() {
        let w = truth.grid.weight(p);
        for c in 0..truth.channels {
            let d = pred.value(p, c) - truth.value(p, c);
            acc += w * d * d;
        }
    }
    Ok(acc.sqrt() / denom)
}

/// Paired input/output fields with generation metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Field>,
    pub outputs: Vec<Field>,
    pub meta: Metadata,
}

/// Key/value generation metadata carried by the dataset container.
///
/// Order-preserving so that serialization is deterministic.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        Metadata::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        if let Some(e) = self.entries.iter_mut().find(|(k, _)| k == key) {
            e.1 = value;
        } else {
            self.entries.push((key.to_string(), value));
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Serialize as `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push_str(k);
            s.push('=');
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut meta = Metadata::new();
        for line in text.lines() {
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad metadata line '{line}'")))?;
            meta.entries.push((k.to_string(), v.to_string()));
        }
        Ok(meta)
    }
}

impl Dataset {
    pub fn new(inputs: Vec<Field>, outputs: Vec<Field>, meta: Metadata) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::Mismatch(format!(
                "inputs ({}) and outputs ({}) must have equal length",
                inputs.len(),
                outputs.len()
            )));
        }
        if let Some(first) = inputs.first() {
            if !inputs.iter().all(|f| f.same_layout(first)) {
                return Err(Error::Mismatch("all inputs must share one grid".into()));
            }
        }
        if let Some(first) = outputs.first() {
            if !outputs.iter().all(|f| f.same_layout(first)) {
                return Err(Error::Mismatch("all outputs must share one grid".into()));
            }
        }
        Ok(Dataset {
            inputs,
            outputs,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::PI;

    fn random_field(grid: &Grid, channels: usize, rng: &mut impl Rng) -> Field {
        let n = grid.num_points() * channels;
        let values = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Field::new(grid.clone(), channels, values).unwrap()
    }

    #[test]
    fn make_grid_spacings() {
        let g = Grid::periodic_1d(200, 1.0).unwrap();
        assert_eq!(g.spacing(0), 0.005);
        assert_eq!(g.num_points(), 200);

        let g = Grid::periodic_2d(64, 2.0 * PI).unwrap();
        assert_eq!(g.num_points(), 4096);

        let g = Grid::new(
            2,
            &[2, 2],
            &[1.0, 1.0],
            &[BoundaryKind::Neumann, BoundaryKind::Neumann],
        )
        .unwrap();
        assert_eq!(g.spacing(0), 1.0);
        assert_eq!(g.spacing(1), 1.0);
    }

    #[test]
    fn make_grid_rejects_bad_args() {
        assert!(Grid::new(3, &[4, 4, 4], &[1.0; 3], &[BoundaryKind::Periodic; 3]).is_err());
        assert!(Grid::new(1, &[1], &[1.0], &[BoundaryKind::Periodic]).is_err());
        assert!(Grid::new(1, &[8], &[-1.0], &[BoundaryKind::Periodic]).is_err());
        assert!(Grid::new(1, &[8], &[0.0], &[BoundaryKind::Periodic]).is_err());
    }

    #[test]
    fn inner_product_constant_gives_domain_measure() {
        let g = Grid::periodic_2d(64, 2.0 * PI).unwrap();
        let f = Field::constant(g, 1, 1.0);
        let v = l2_inner(&f, &f).unwrap();
        assert!((v - 4.0 * PI * PI).abs() < 1e-10);
    }

    #[test]
    fn inner_product_orthogonal_modes() {
        let g = Grid::periodic_2d(64, 2.0 * PI).unwrap();
        let c = Field::from_fn(g.clone(), |x| x[0].cos());
        let s = Field::from_fn(g.clone(), |x| x[0].sin());
        assert!(l2_inner(&c, &s).unwrap().abs() < 1e-12);
        // exact integral of cos^2 over [0,2pi]^2 is 2 pi^2
        assert!((l2_inner(&c, &c).unwrap() - 2.0 * PI * PI).abs() < 1e-10);
    }

    #[test]
    fn inner_product_rejects_mismatched_grids() {
        let a = Field::constant(Grid::periodic_1d(8, 1.0).unwrap(), 1, 1.0);
        let b = Field::constant(Grid::periodic_1d(16, 1.0).unwrap(), 1, 1.0);
        assert!(l2_inner(&a, &b).is_err());
    }

    #[test]
    fn inner_product_is_bilinear_symmetric_positive() {
        let g = Grid::periodic_1d(32, 1.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..20 {
            let f = random_field(&g, 2, &mut rng);
            let h = random_field(&g, 2, &mut rng);
            let k = random_field(&g, 2, &mut rng);
            let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let mut comb = f.clone();
            for i in 0..comb.values.len() {
                comb.values[i] = a * f.values[i] + b * h.values[i];
            }
            let lhs = l2_inner(&comb, &k).unwrap();
            let rhs = a * l2_inner(&f, &k).unwrap() + b * l2_inner(&h, &k).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
            assert_eq!(l2_inner(&f, &h).unwrap(), l2_inner(&h, &f).unwrap());
            assert!(l2_inner(&f, &f).unwrap() > 0.0);
        }
    }

    #[test]
    fn norm_is_absolutely_homogeneous() {
        let g = Grid::periodic_1d(32, 1.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..20 {
            let f = random_field(&g, 1, &mut rng);
            let alpha: f64 = rng.gen_range(-5.0..5.0);
            let mut scaled = f.clone();
            for v in scaled.values.iter_mut() {
                *v *= alpha;
            }
            let lhs = l2_norm(&scaled);
            let rhs = alpha.abs() * l2_norm(&f);
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }
    }

    #[test]
    fn relative_error_basics() {
        let g = Grid::periodic_1d(16, 1.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let truth = random_field(&g, 1, &mut rng);
        assert_eq!(relative_l2_error(&truth, &truth).unwrap(), 0.0);
        let zero = Field::zeros(g.clone(), 1);
        assert!((relative_l2_error(&zero, &truth).unwrap() - 1.0).abs() < 1e-14);
        let mut double = truth.clone();
        for v in double.values.iter_mut() {
            *v *= 2.0;
        }
        assert!((relative_l2_error(&double, &truth).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            relative_l2_error(&truth, &zero),
            Err(Error::ZeroNorm)
        ));
    }

    #[test]
    fn relative_error_is_scale_invariant() {
        let g = Grid::periodic_1d(16, 1.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let truth = random_field(&g, 1, &mut rng);
        let pred = random_field(&g, 1, &mut rng);
        let base = relative_l2_error(&pred, &truth).unwrap();
        for &alpha in &[0.5, 3.0, 100.0] {
            let scale = |f: &Field| {
                let mut g = f.clone();
                for v in g.values.iter_mut() {
                    *v *= alpha;
                }
                g
            };
            let e = relative_l2_error(&scale(&pred), &scale(&truth)).unwrap();
            assert!((e - base).abs() < 1e-12);
        }
    }

    #[test]
    fn trapezoid_weights_on_neumann_grid() {
        let g = Grid::new(1, &[5], &[1.0], &[BoundaryKind::Neumann]).unwrap();
        let w = g.weights();
        assert!((w[0] - 0.125).abs() < 1e-15);
        assert!((w[2] - 0.25).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
