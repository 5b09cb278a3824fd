//! The four operator approximators behind one build/forward/train interface:
//! PCA-Net and DeepONet (coefficient-space nets over PCA encodings), PARA-Net
//! (a pointwise net over encoded input and query coordinates), and FNO (lift,
//! three Fourier layers, project). Gradients are hand-derived end to end.

use crate::complexity::{ArchConfig, ArchKind};
use crate::field::{Field, Grid, Metadata};
use crate::nn::{corner_modes, hidden_stack_sizes, Activation, Adam, Mlp, SpectralConvCache, SpectralConvLayer};
use crate::opbl::Checkpoint;
use crate::pca::{fit_pca_with, PcaBasis};
use crate::{seed, Error, Result};
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use std::path::Path;

/// Architecture and build-time choices for one model.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub kind: ArchKind,
    /// Width `w` for the coefficient-space nets, channel count `d_f` for FNO.
    pub size: usize,
    pub d_u: usize,
    pub d_v: usize,
    /// Centered PCA subtracts the sample mean (default); the uncentered
    /// variant matches the raw synthesis formula exactly.
    pub centered_pca: bool,
    /// Retained low-frequency block (k1, k2) of the half spectrum; 1-D grids
    /// use (1, k2).
    pub fno_block: (usize, usize),
    /// Also retain the negative-k1 corner block (reference-FNO layout, which
    /// doubles k_max). Off by default: the single block matches the published
    /// parameter counts.
    pub fno_two_block: bool,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(kind: ArchKind, size: usize) -> Self {
        ModelConfig {
            kind,
            size,
            d_u: 128,
            d_v: 128,
            centered_pca: true,
            fno_block: (12, 12),
            fno_two_block: false,
            seed: 0,
        }
    }
}

/// FNO pieces: affine lift, Fourier layers, affine projection.
#[derive(Debug, Clone)]
pub struct FnoParts {
    pub lift_w: Array2<f64>,
    pub lift_b: Array1<f64>,
    pub layers: Vec<SpectralConvLayer>,
    pub proj_w: Array2<f64>,
    pub proj_b: Array1<f64>,
    /// Grid the stored retained-mode indices refer to.
    pub grid: Grid,
}

/// Architecture-specific state.
#[derive(Debug, Clone)]
pub enum ModelKind {
    PcaNet {
        input: PcaBasis,
        output: PcaBasis,
        branch: Mlp,
    },
    DeepOnet {
        input: PcaBasis,
        branch: Mlp,
        trunk: Mlp,
    },
    ParaNet {
        input: PcaBasis,
        net: Mlp,
    },
    Fno(FnoParts),
}

/// A built operator approximator with its problem metadata.
#[derive(Debug, Clone)]
pub struct OperatorModel {
    pub config: ModelConfig,
    pub input_grid: Grid,
    pub input_channels: usize,
    pub output_grid: Grid,
    pub output_channels: usize,
    pub kind: ModelKind,
}

fn retained_modes(grid: &Grid, block: (usize, usize), two_block: bool) -> Result<Vec<usize>> {
    let (k1, k2) = if grid.dims() == 1 { (1, block.1) } else { block };
    let mut modes = corner_modes(grid, k1, k2)?;
    if two_block && grid.dims() == 2 {
        let n1 = grid.points()[0];
        let half2 = grid.points()[1] / 2 + 1;
        if 2 * k1 > n1 {
            return Err(Error::InvalidArgument(
                "two-block retained modes exceed the grid rows".into(),
            ));
        }
        for i1 in (n1 - k1)..n1 {
            for j2 in 0..k2 {
                modes.push(i1 * half2 + j2);
            }
        }
    }
    Ok(modes)
}

fn coords_matrix(grid: &Grid) -> Array2<f64> {
    let np = grid.num_points();
    let dims = grid.dims();
    let mut m = Array2::zeros((np, dims));
    for p in 0..np {
        let c = grid.coords(p);
        for d in 0..dims {
            m[(p, d)] = c[d];
        }
    }
    m
}

fn glorot_uniform(rows: usize, cols: usize, rng: &mut ChaCha12Rng) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..limit))
}

/// Build an initialized, untrained model. PCA bases are fitted on the given
/// training data only.
pub fn build_model(cfg: &ModelConfig, inputs: &[Field], outputs: &[Field]) -> Result<OperatorModel> {
    if inputs.is_empty() || inputs.len() != outputs.len() {
        return Err(Error::InvalidArgument(
            "model building needs equal, nonempty input/output sample lists".into(),
        ));
    }
    let input_grid = inputs[0].grid.clone();
    let input_channels = inputs[0].channels;
    let output_grid = outputs[0].grid.clone();
    let output_channels = outputs[0].channels;
    let d_y = output_grid.dims();
    let mut rng = seed::rng(cfg.seed, "init", 0);

    let kind = match cfg.kind {
        ArchKind::PcaNet => {
            let input = fit_pca_with(inputs, cfg.d_u, cfg.centered_pca)?;
            let output = fit_pca_with(outputs, cfg.d_v, cfg.centered_pca)?;
            let branch = Mlp::init(
                &hidden_stack_sizes(cfg.d_u, cfg.size, cfg.d_v),
                Activation::Relu,
                &mut rng,
            )?;
            ModelKind::PcaNet {
                input,
                output,
                branch,
            }
        }
        ArchKind::DeepOnet => {
            let input = fit_pca_with(inputs, cfg.d_u, cfg.centered_pca)?;
            let branch = Mlp::init(
                &hidden_stack_sizes(cfg.d_u, cfg.size, cfg.d_v),
                Activation::Relu,
                &mut rng,
            )?;
            let trunk = Mlp::init(
                &hidden_stack_sizes(d_y, cfg.size, cfg.d_v * output_channels),
                Activation::Relu,
                &mut rng,
            )?;
            ModelKind::DeepOnet {
                input,
                branch,
                trunk,
            }
        }
        ArchKind::ParaNet => {
            let input = fit_pca_with(inputs, cfg.d_u, cfg.centered_pca)?;
            let net = Mlp::init(
                &hidden_stack_sizes(cfg.d_u + d_y, cfg.size, output_channels),
                Activation::Relu,
                &mut rng,
            )?;
            ModelKind::ParaNet { input, net }
        }
        ArchKind::Fno => {
            if input_grid != output_grid {
                return Err(Error::Mismatch("FNO requires matching input/output grids".into()));
            }
            let d_f = cfg.size;
            let modes = retained_modes(&input_grid, cfg.fno_block, cfg.fno_two_block)?;
            let lift_w = glorot_uniform(d_f, input_channels, &mut rng);
            let lift_b = Array1::zeros(d_f);
            let layers = (0..3)
                .map(|_| {
                    SpectralConvLayer::init(d_f, modes.clone(), Some(Activation::Gelu), &mut rng)
                })
                .collect();
            let proj_w = glorot_uniform(output_channels, d_f, &mut rng);
            let proj_b = Array1::zeros(output_channels);
            ModelKind::Fno(FnoParts {
                lift_w,
                lift_b,
                layers,
                proj_w,
                proj_b,
                grid: input_grid.clone(),
            })
        }
    };

    Ok(OperatorModel {
        config: cfg.clone(),
        input_grid,
        input_channels,
        output_grid,
        output_channels,
        kind,
    })
}

struct FnoEval {
    out: Field,
    caches: Vec<SpectralConvCache>,
    v_last: Field,
}

fn fno_forward(parts: &FnoParts, m: &OperatorModel, u: &Field) -> Result<FnoEval> {
    let d_f = parts.lift_w.nrows();
    // reindex the retained block when evaluating on a different resolution
    let layers_owned;
    let layers: &[SpectralConvLayer] = if u.grid == parts.grid {
        &parts.layers
    } else {
        let modes = retained_modes(&u.grid, m.config.fno_block, m.config.fno_two_block)?;
        layers_owned = parts
            .layers
            .iter()
            .map(|l| {
                let mut l = l.clone();
                l.modes = modes.clone();
                l
            })
            .collect::<Vec<_>>();
        &layers_owned
    };
    let np = u.grid.num_points();
    let d_i = m.input_channels;
    let mut v = Field::zeros(u.grid.clone(), d_f);
    for p in 0..np {
        for f in 0..d_f {
            let mut acc = parts.lift_b[f];
            for i in 0..d_i {
                acc += parts.lift_w[(f, i)] * u.values[p * d_i + i];
            }
            v.values[p * d_f + f] = acc;
        }
    }
    let mut caches = Vec::with_capacity(layers.len());
    for layer in layers {
        let (next, cache) = layer.forward(&v)?;
        caches.push(cache);
        v = next;
    }
    let d_o = m.output_channels;
    let mut out = Field::zeros(u.grid.clone(), d_o);
    for p in 0..np {
        for o in 0..d_o {
            let mut acc = parts.proj_b[o];
            for f in 0..d_f {
                acc += parts.proj_w[(o, f)] * v.values[p * d_f + f];
            }
            out.values[p * d_o + o] = acc;
        }
    }
    Ok(FnoEval {
        out,
        caches,
        v_last: v,
    })
}

impl OperatorModel {
    /// Retained FNO mode count (1 for the other architectures, where the
    /// counters ignore it).
    pub fn k_max(&self) -> usize {
        match &self.kind {
            ModelKind::Fno(p) => p.layers[0].k_max(),
            _ => 1,
        }
    }

    /// The closed-form counter inputs implied by this model.
    pub fn arch_config(&self) -> ArchConfig {
        ArchConfig {
            kind: self.config.kind,
            size: self.config.size,
            d_u: self.config.d_u,
            d_v: self.config.d_v,
            d_i: self.input_channels,
            d_o: self.output_channels,
            d_y: self.output_grid.dims(),
            k_max: self.k_max(),
            n_p: self.output_grid.num_points(),
        }
    }

    /// Walk the actual parameter arrays; complex spectral entries count once.
    pub fn param_count_enumerated(&self) -> u64 {
        match &self.kind {
            ModelKind::PcaNet { branch, .. } => branch.param_count() as u64,
            ModelKind::DeepOnet { branch, trunk, .. } => {
                (branch.param_count() + trunk.param_count()) as u64
            }
            ModelKind::ParaNet { net, .. } => net.param_count() as u64,
            ModelKind::Fno(p) => {
                let affine = p.lift_w.len() + p.lift_b.len() + p.proj_w.len() + p.proj_b.len();
                let layers: usize = p
                    .layers
                    .iter()
                    .map(|l| l.w_local.len() + l.weights.len())
                    .sum();
                (affine + layers) as u64
            }
        }
    }

    /// Trainable real scalars (complex entries count twice here).
    pub fn trainable_scalar_count(&self) -> usize {
        self.params_flat().len()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        match &self.kind {
            ModelKind::PcaNet { branch, .. } => branch.params_flat(),
            ModelKind::DeepOnet { branch, trunk, .. } => {
                let mut p = branch.params_flat();
                p.extend(trunk.params_flat());
                p
            }
            ModelKind::ParaNet { net, .. } => net.params_flat(),
            ModelKind::Fno(parts) => {
                let mut p: Vec<f64> = parts.lift_w.iter().copied().collect();
                p.extend(parts.lift_b.iter());
                for l in &parts.layers {
                    p.extend(l.params_flat());
                }
                p.extend(parts.proj_w.iter());
                p.extend(parts.proj_b.iter());
                p
            }
        }
    }

    pub fn set_params_flat(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.trainable_scalar_count() {
            return Err(Error::Mismatch(format!(
                "expected {} trainable scalars, got {}",
                self.trainable_scalar_count(),
                p.len()
            )));
        }
        match &mut self.kind {
            ModelKind::PcaNet { branch, .. } => branch.set_params_flat(p),
            ModelKind::DeepOnet { branch, trunk, .. } => {
                let nb = branch.param_count();
                branch.set_params_flat(&p[..nb])?;
                trunk.set_params_flat(&p[nb..])
            }
            ModelKind::ParaNet { net, .. } => net.set_params_flat(p),
            ModelKind::Fno(parts) => {
                let mut it = p.iter();
                for v in parts.lift_w.iter_mut() {
                    *v = *it.next().unwrap();
                }
                for v in parts.lift_b.iter_mut() {
                    *v = *it.next().unwrap();
                }
                for l in parts.layers.iter_mut() {
                    let n = l.param_count();
                    let chunk: Vec<f64> = it.by_ref().take(n).copied().collect();
                    l.set_params_flat(&chunk)?;
                }
                for v in parts.proj_w.iter_mut() {
                    *v = *it.next().unwrap();
                }
                for v in parts.proj_b.iter_mut() {
                    *v = *it.next().unwrap();
                }
                Ok(())
            }
        }
    }

    fn check_input(&self, u: &Field) -> Result<()> {
        if u.channels != self.input_channels {
            return Err(Error::Mismatch(format!(
                "model expects {} input channels, got {}",
                self.input_channels, u.channels
            )));
        }
        match self.kind {
            // FNO transfers across resolutions of the same domain
            ModelKind::Fno(_) => {
                if u.grid.dims() != self.input_grid.dims()
                    || u.grid.extents() != self.input_grid.extents()
                    || u.grid.boundaries() != self.input_grid.boundaries()
                {
                    return Err(Error::Mismatch("input domain differs from training domain".into()));
                }
            }
            _ => {
                if u.grid != self.input_grid {
                    return Err(Error::Mismatch("input grid differs from training grid".into()));
                }
            }
        }
        Ok(())
    }

    /// Evaluate the operator on one input field.
    pub fn forward(&self, u: &Field) -> Result<Field> {
        self.check_input(u)?;
        match &self.kind {
            ModelKind::PcaNet {
                input,
                output,
                branch,
            } => {
                let c = input.project(u)?;
                let x = Array2::from_shape_vec((1, c.len()), c).expect("row vector");
                let (alpha, _) = branch.forward(&x)?;
                output.reconstruct(alpha.row(0).as_slice().expect("contiguous"))
            }
            ModelKind::DeepOnet {
                input,
                branch,
                trunk,
            } => {
                let c = input.project(u)?;
                let x = Array2::from_shape_vec((1, c.len()), c).expect("row vector");
                let (alpha, _) = branch.forward(&x)?;
                let y = coords_matrix(&self.output_grid);
                let (t, _) = trunk.forward(&y)?;
                let d_v = self.config.d_v;
                let d_o = self.output_channels;
                let np = self.output_grid.num_points();
                let mut out = Field::zeros(self.output_grid.clone(), d_o);
                for p in 0..np {
                    for o in 0..d_o {
                        let mut acc = 0.0;
                        for j in 0..d_v {
                            acc += alpha[(0, j)] * t[(p, j * d_o + o)];
                        }
                        out.values[p * d_o + o] = acc;
                    }
                }
                Ok(out)
            }
            ModelKind::ParaNet { input, net } => {
                let c = input.project(u)?;
                let y = coords_matrix(&self.output_grid);
                let np = self.output_grid.num_points();
                let d_y = y.ncols();
                let mut x = Array2::zeros((np, c.len() + d_y));
                for p in 0..np {
                    for (j, cj) in c.iter().enumerate() {
                        x[(p, j)] = *cj;
                    }
                    for d in 0..d_y {
                        x[(p, c.len() + d)] = y[(p, d)];
                    }
                }
                let (o, _) = net.forward(&x)?;
                let d_o = self.output_channels;
                let mut out = Field::zeros(self.output_grid.clone(), d_o);
                for p in 0..np {
                    for ch in 0..d_o {
                        out.values[p * d_o + ch] = o[(p, ch)];
                    }
                }
                Ok(out)
            }
            ModelKind::Fno(parts) => Ok(fno_forward(parts, self, u)?.out),
        }
    }
}

/// Empirical-risk loss and its exact gradient over one mini-batch, flattened
/// in [`OperatorModel::params_flat`] order. PCA-Net trains in coefficient
/// space (Parseval makes that the V-norm loss up to the fixed truncation
/// residual); PARA-Net uses per-sample point subsets when provided and the
/// full grid otherwise.
pub fn empirical_loss_grad(
    model: &OperatorModel,
    inputs: &[&Field],
    targets: &[&Field],
    para_subsets: Option<&[Vec<usize>]>,
) -> Result<(f64, Vec<f64>)> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::InvalidArgument("batch inputs/targets must be equal and nonempty".into()));
    }
    let b = inputs.len();
    let bf = b as f64;
    for u in inputs {
        model.check_input(u)?;
    }
    let weights = model.output_grid.weights();
    match &model.kind {
        ModelKind::PcaNet {
            input,
            output,
            branch,
        } => {
            let d_u = model.config.d_u;
            let d_v = model.config.d_v;
            let mut c = Array2::zeros((b, d_u));
            let mut beta = Array2::zeros((b, d_v));
            for (n, (u, v)) in inputs.iter().zip(targets).enumerate() {
                for (j, cj) in input.project(u)?.iter().enumerate() {
                    c[(n, j)] = *cj;
                }
                for (j, bj) in output.project(v)?.iter().enumerate() {
                    beta[(n, j)] = *bj;
                }
            }
            let (alpha, cache) = branch.forward(&c)?;
            let r = &alpha - &beta;
            let loss = r.iter().map(|v| v * v).sum::<f64>() / bf;
            let g_out = r.mapv(|v| 2.0 * v / bf);
            let (g, _) = branch.backward(&cache, &g_out)?;
            Ok((loss, g))
        }
        ModelKind::DeepOnet {
            input,
            branch,
            trunk,
        } => {
            let d_u = model.config.d_u;
            let d_v = model.config.d_v;
            let d_o = model.output_channels;
            let np = model.output_grid.num_points();
            let mut c = Array2::zeros((b, d_u));
            for (n, u) in inputs.iter().enumerate() {
                for (j, cj) in input.project(u)?.iter().enumerate() {
                    c[(n, j)] = *cj;
                }
            }
            let (alpha, bcache) = branch.forward(&c)?;
            let y = coords_matrix(&model.output_grid);
            let (t, tcache) = trunk.forward(&y)?;
            // t3[j, p * d_o + o] = t[p, j * d_o + o]
            let mut t3 = Array2::zeros((d_v, np * d_o));
            for p in 0..np {
                for j in 0..d_v {
                    for o in 0..d_o {
                        t3[(j, p * d_o + o)] = t[(p, j * d_o + o)];
                    }
                }
            }
            let pred = alpha.dot(&t3);
            let mut g_pred = Array2::zeros((b, np * d_o));
            let mut loss = 0.0;
            for (n, v) in targets.iter().enumerate() {
                for p in 0..np {
                    for o in 0..d_o {
                        let r = pred[(n, p * d_o + o)] - v.values[p * d_o + o];
                        loss += weights[p] * r * r;
                        g_pred[(n, p * d_o + o)] = 2.0 * weights[p] * r / bf;
                    }
                }
            }
            loss /= bf;
            let g_alpha = g_pred.dot(&t3.t());
            let g_t3 = alpha.t().dot(&g_pred);
            let mut g_t = Array2::zeros((np, d_v * d_o));
            for p in 0..np {
                for j in 0..d_v {
                    for o in 0..d_o {
                        g_t[(p, j * d_o + o)] = g_t3[(j, p * d_o + o)];
                    }
                }
            }
            let (mut g, _) = branch.backward(&bcache, &g_alpha)?;
            let (gt, _) = trunk.backward(&tcache, &g_t)?;
            g.extend(gt);
            Ok((loss, g))
        }
        ModelKind::ParaNet { input, net } => {
            let d_u = model.config.d_u;
            let d_y = model.output_grid.dims();
            let d_o = model.output_channels;
            let np = model.output_grid.num_points();
            let measure = model.output_grid.domain_measure();
            let full: Vec<usize> = (0..np).collect();
            let mut rows = 0usize;
            let mut subsets: Vec<&[usize]> = Vec::with_capacity(b);
            for n in 0..b {
                let s = match para_subsets {
                    Some(all) => all[n].as_slice(),
                    None => full.as_slice(),
                };
                if s.iter().any(|&p| p >= np) {
                    return Err(Error::InvalidArgument("point subset index out of range".into()));
                }
                rows += s.len();
                subsets.push(s);
            }
            let mut x = Array2::zeros((rows, d_u + d_y));
            let mut row = 0usize;
            for (n, u) in inputs.iter().enumerate() {
                let c = input.project(u)?;
                for &p in subsets[n] {
                    for j in 0..d_u {
                        x[(row, j)] = c[j];
                    }
                    let y = model.output_grid.coords(p);
                    for d in 0..d_y {
                        x[(row, d_u + d)] = y[d];
                    }
                    row += 1;
                }
            }
            let (pred, cache) = net.forward(&x)?;
            let mut g_pred = Array2::zeros((rows, d_o));
            let mut loss = 0.0;
            let mut row = 0usize;
            for (n, v) in targets.iter().enumerate() {
                let scale = measure / subsets[n].len() as f64;
                for &p in subsets[n] {
                    for o in 0..d_o {
                        let r = pred[(row, o)] - v.values[p * d_o + o];
                        loss += scale * r * r;
                        g_pred[(row, o)] = 2.0 * scale * r / bf;
                    }
                    row += 1;
                }
            }
            loss /= bf;
            let (g, _) = net.backward(&cache, &g_pred)?;
            Ok((loss, g))
        }
        ModelKind::Fno(parts) => {
            let d_f = parts.lift_w.nrows();
            let d_i = model.input_channels;
            let d_o = model.output_channels;
            let np = model.output_grid.num_points();
            let mut loss = 0.0;
            let mut g_lift_w = Array2::<f64>::zeros(parts.lift_w.raw_dim());
            let mut g_lift_b = Array1::<f64>::zeros(parts.lift_b.raw_dim());
            let mut g_layers: Vec<Vec<f64>> = parts
                .layers
                .iter()
                .map(|l| vec![0.0; l.param_count()])
                .collect();
            let mut g_proj_w = Array2::<f64>::zeros(parts.proj_w.raw_dim());
            let mut g_proj_b = Array1::<f64>::zeros(parts.proj_b.raw_dim());
            for (u, v) in inputs.iter().zip(targets) {
                let eval = fno_forward(parts, model, u)?;
                let mut g_out = Field::zeros(model.output_grid.clone(), d_o);
                for p in 0..np {
                    for o in 0..d_o {
                        let r = eval.out.values[p * d_o + o] - v.values[p * d_o + o];
                        loss += weights[p] * r * r;
                        g_out.values[p * d_o + o] = 2.0 * weights[p] * r / bf;
                    }
                }
                // projection
                let mut g_v = Field::zeros(model.output_grid.clone(), d_f);
                for p in 0..np {
                    for o in 0..d_o {
                        let go = g_out.values[p * d_o + o];
                        g_proj_b[o] += go;
                        for f in 0..d_f {
                            g_proj_w[(o, f)] += go * eval.v_last.values[p * d_f + f];
                            g_v.values[p * d_f + f] += go * parts.proj_w[(o, f)];
                        }
                    }
                }
                // Fourier layers, reversed
                for (l, cache) in parts.layers.iter().zip(&eval.caches).rev() {
                    let (gl, g_in) = l.backward(cache, &g_v)?;
                    let slot = g_layers
                        .iter_mut()
                        .nth(parts.layers.iter().zip(&eval.caches).position(|(ll, cc)| {
                            std::ptr::eq(ll, l) && std::ptr::eq(cc, cache)
                        }).expect("layer present"))
                        .expect("slot present");
                    for (a, b2) in slot.iter_mut().zip(&gl) {
                        *a += b2;
                    }
                    g_v = g_in;
                }
                // lift
                for p in 0..np {
                    for f in 0..d_f {
                        let gv = g_v.values[p * d_f + f];
                        g_lift_b[f] += gv;
                        for i in 0..d_i {
                            g_lift_w[(f, i)] += gv * u.values[p * d_i + i];
                        }
                    }
                }
            }
            loss /= bf;
            let mut g: Vec<f64> = g_lift_w.iter().copied().collect();
            g.extend(g_lift_b.iter());
            for gl in &g_layers {
                g.extend(gl.iter());
            }
            g.extend(g_proj_w.iter());
            g.extend(g_proj_b.iter());
            Ok((loss, g))
        }
    }
}

/// Optimizer and schedule settings for one training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    /// Halve the learning rate at each third of the epoch budget.
    pub decay: bool,
    pub seed: u64,
    /// Output points drawn per sample per batch for PARA-Net.
    pub para_points: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch: 64,
            lr: 1e-3,
            decay: true,
            seed: 0,
            para_points: 256,
        }
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub loss_history: Vec<f64>,
    /// Mean relative test error per epoch when a test set was supplied.
    pub test_history: Vec<f64>,
}

/// Mean over a sample set of the relative V-norm error of the model outputs.
pub fn mean_relative_error(
    model: &OperatorModel,
    inputs: &[Field],
    outputs: &[Field],
) -> Result<f64> {
    if inputs.is_empty() || inputs.len() != outputs.len() {
        return Err(Error::InvalidArgument("evaluation sets must be equal and nonempty".into()));
    }
    let mut acc = 0.0;
    for (u, v) in inputs.iter().zip(outputs) {
        acc += crate::field::relative_l2_error(&model.forward(u)?, v)?;
    }
    Ok(acc / inputs.len() as f64)
}

/// Minimize the empirical risk with mini-batch Adam. Deterministic given the
/// seed; aborts with epoch/batch identity if the loss leaves the finite
/// range.
pub fn train(
    model: &mut OperatorModel,
    inputs: &[Field],
    outputs: &[Field],
    cfg: &TrainConfig,
    test: Option<(&[Field], &[Field])>,
) -> Result<TrainReport> {
    if inputs.is_empty() || inputs.len() != outputs.len() {
        return Err(Error::InvalidArgument("training sets must be equal and nonempty".into()));
    }
    if cfg.epochs == 0 || cfg.batch == 0 || cfg.para_points == 0 {
        return Err(Error::InvalidArgument("training counts must be positive".into()));
    }
    let n = inputs.len();
    let np = model.output_grid.num_points();
    let is_para = matches!(model.kind, ModelKind::ParaNet { .. });
    let mut params = model.params_flat();
    let mut opt = Adam::new(params.len(), cfg.lr);
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let mut test_history = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        if cfg.decay {
            let stage = 3 * epoch / cfg.epochs;
            opt.lr = cfg.lr * 0.5f64.powi(stage as i32);
        }
        let mut shuffle_rng = seed::rng(cfg.seed, "shuffle", epoch as u64);
        order.shuffle(&mut shuffle_rng);
        let mut point_rng = seed::rng(cfg.seed, "para-points", epoch as u64);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch) {
            let bi: Vec<&Field> = chunk.iter().map(|&i| &inputs[i]).collect();
            let bt: Vec<&Field> = chunk.iter().map(|&i| &outputs[i]).collect();
            let subsets: Option<Vec<Vec<usize>>> = if is_para {
                let k = cfg.para_points.min(np);
                Some(
                    chunk
                        .iter()
                        .map(|_| sample_indices(&mut point_rng, np, k).into_vec())
                        .collect(),
                )
            } else {
                None
            };
            model.set_params_flat(&params)?;
            let (loss, grads) = empirical_loss_grad(model, &bi, &bt, subsets.as_deref())?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite training loss at epoch {epoch}, batch {batches}"
                )));
            }
            opt.step(&mut params, &grads)?;
            epoch_loss += loss;
            batches += 1;
        }
        loss_history.push(epoch_loss / batches as f64);
        if let Some((tu, tv)) = test {
            model.set_params_flat(&params)?;
            test_history.push(mean_relative_error(model, tu, tv)?);
        }
    }
    model.set_params_flat(&params)?;
    Ok(TrainReport {
        loss_history,
        test_history,
    })
}

/// Evaluate all `d_v` trunk functions of a DeepONet on the output grid,
/// report the fraction that are identically zero (sup norm below 1e-10), and
/// fit a PCA basis of the trunk functions.
pub fn trunk_basis_pca(
    model: &OperatorModel,
    k: usize,
) -> Result<(Vec<Field>, f64, PcaBasis)> {
    let ModelKind::DeepOnet { trunk, .. } = &model.kind else {
        return Err(Error::InvalidArgument("trunk analysis requires a DeepONet".into()));
    };
    let y = coords_matrix(&model.output_grid);
    let (t, _) = trunk.forward(&y)?;
    let d_v = model.config.d_v;
    let d_o = model.output_channels;
    let np = model.output_grid.num_points();
    let mut fields = Vec::with_capacity(d_v);
    let mut zero = 0usize;
    for j in 0..d_v {
        let mut vals = vec![0.0; np * d_o];
        for p in 0..np {
            for o in 0..d_o {
                vals[p * d_o + o] = t[(p, j * d_o + o)];
            }
        }
        if vals.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 1e-10 {
            zero += 1;
        }
        fields.push(Field::new(model.output_grid.clone(), d_o, vals)?);
    }
    let basis = fit_pca_with(&fields, k, true)?;
    Ok((fields, zero as f64 / d_v as f64, basis))
}

fn basis_to_checkpoint(prefix: &str, basis: &PcaBasis, ck: &mut Checkpoint) {
    ck.manifest.set(&format!("{prefix}_d"), basis.d());
    ck.manifest.set(&format!("{prefix}_centered"), basis.centered);
    ck.push(&format!("{prefix}_mean"), basis.mean.clone());
    ck.push(&format!("{prefix}_modes"), basis.modes.clone());
    ck.push(&format!("{prefix}_spectrum"), basis.spectrum.clone());
}

fn basis_from_checkpoint(
    prefix: &str,
    ck: &Checkpoint,
    grid: &Grid,
    channels: usize,
) -> Result<PcaBasis> {
    let centered: bool = ck
        .manifest
        .get(&format!("{prefix}_centered"))
        .ok_or_else(|| Error::Format(format!("checkpoint missing {prefix}_centered")))?
        .parse()
        .map_err(|_| Error::Format("bad centered flag".into()))?;
    let basis = PcaBasis {
        grid: grid.clone(),
        channels,
        mean: ck.get(&format!("{prefix}_mean"))?.to_vec(),
        modes: ck.get(&format!("{prefix}_modes"))?.to_vec(),
        spectrum: ck.get(&format!("{prefix}_spectrum"))?.to_vec(),
        centered,
    };
    let m = grid.num_points() * channels;
    if basis.mean.len() != m || basis.modes.len() != basis.d() * m {
        return Err(Error::Format("checkpoint basis has inconsistent shapes".into()));
    }
    Ok(basis)
}

impl OperatorModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut manifest = Metadata::new();
        manifest.set("kind", "operator_model");
        manifest.set("arch", self.config.kind.as_str());
        manifest.set("size", self.config.size);
        manifest.set("d_u", self.config.d_u);
        manifest.set("d_v", self.config.d_v);
        manifest.set("centered_pca", self.config.centered_pca);
        manifest.set("fno_block_k1", self.config.fno_block.0);
        manifest.set("fno_block_k2", self.config.fno_block.1);
        manifest.set("fno_two_block", self.config.fno_two_block);
        manifest.set("seed", self.config.seed);
        manifest.set("input_channels", self.input_channels);
        manifest.set("output_channels", self.output_channels);
        self.input_grid.to_metadata("input", &mut manifest);
        self.output_grid.to_metadata("output", &mut manifest);
        let mut ck = Checkpoint::new(manifest);
        ck.push("params", self.params_flat());
        match &self.kind {
            ModelKind::PcaNet { input, output, .. } => {
                basis_to_checkpoint("in_basis", input, &mut ck);
                basis_to_checkpoint("out_basis", output, &mut ck);
            }
            ModelKind::DeepOnet { input, .. } | ModelKind::ParaNet { input, .. } => {
                basis_to_checkpoint("in_basis", input, &mut ck);
            }
            ModelKind::Fno(_) => {}
        }
        ck.write(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ck = Checkpoint::read(path)?;
        let need = |key: &str| -> Result<&str> {
            ck.manifest
                .get(key)
                .ok_or_else(|| Error::Format(format!("model checkpoint missing '{key}'")))
        };
        if need("kind")? != "operator_model" {
            return Err(Error::Format("checkpoint is not an operator model".into()));
        }
        let parse_usize = |key: &str| -> Result<usize> {
            need(key)?
                .parse()
                .map_err(|_| Error::Format(format!("bad integer for '{key}'")))
        };
        let parse_bool = |key: &str| -> Result<bool> {
            need(key)?
                .parse()
                .map_err(|_| Error::Format(format!("bad flag for '{key}'")))
        };
        let config = ModelConfig {
            kind: ArchKind::parse(need("arch")?)?,
            size: parse_usize("size")?,
            d_u: parse_usize("d_u")?,
            d_v: parse_usize("d_v")?,
            centered_pca: parse_bool("centered_pca")?,
            fno_block: (parse_usize("fno_block_k1")?, parse_usize("fno_block_k2")?),
            fno_two_block: parse_bool("fno_two_block")?,
            seed: need("seed")?
                .parse()
                .map_err(|_| Error::Format("bad seed".into()))?,
        };
        let input_grid = Grid::from_metadata("input", &ck.manifest)?;
        let output_grid = Grid::from_metadata("output", &ck.manifest)?;
        let input_channels = parse_usize("input_channels")?;
        let output_channels = parse_usize("output_channels")?;
        let d_y = output_grid.dims();
        let kind = match config.kind {
            ArchKind::PcaNet => ModelKind::PcaNet {
                input: basis_from_checkpoint("in_basis", &ck, &input_grid, input_channels)?,
                output: basis_from_checkpoint("out_basis", &ck, &output_grid, output_channels)?,
                branch: Mlp::zeros(
                    &hidden_stack_sizes(config.d_u, config.size, config.d_v),
                    Activation::Relu,
                )?,
            },
            ArchKind::DeepOnet => ModelKind::DeepOnet {
                input: basis_from_checkpoint("in_basis", &ck, &input_grid, input_channels)?,
                branch: Mlp::zeros(
                    &hidden_stack_sizes(config.d_u, config.size, config.d_v),
                    Activation::Relu,
                )?,
                trunk: Mlp::zeros(
                    &hidden_stack_sizes(d_y, config.size, config.d_v * output_channels),
                    Activation::Relu,
                )?,
            },
            ArchKind::ParaNet => ModelKind::ParaNet {
                input: basis_from_checkpoint("in_basis", &ck, &input_grid, input_channels)?,
                net: Mlp::zeros(
                    &hidden_stack_sizes(config.d_u + d_y, config.size, output_channels),
                    Activation::Relu,
                )?,
            },
            ArchKind::Fno => {
                let d_f = config.size;
                let modes = retained_modes(&input_grid, config.fno_block, config.fno_two_block)?;
                let k_max = modes.len();
                ModelKind::Fno(FnoParts {
                    lift_w: Array2::zeros((d_f, input_channels)),
                    lift_b: Array1::zeros(d_f),
                    layers: (0..3)
                        .map(|_| SpectralConvLayer {
                            d_f,
                            modes: modes.clone(),
                            weights: vec![Complex64::new(0.0, 0.0); k_max * d_f * d_f],
                            w_local: Array2::zeros((d_f, d_f)),
                            activation: Some(Activation::Gelu),
                        })
                        .collect(),
                    proj_w: Array2::zeros((output_channels, d_f)),
                    proj_b: Array1::zeros(output_channels),
                    grid: input_grid.clone(),
                })
            }
        };
        let mut model = OperatorModel {
            config,
            input_grid,
            input_channels,
            output_grid,
            output_channels,
            kind,
        };
        model.set_params_flat(ck.get("params")?)?;
        Ok(model)
    }
}
