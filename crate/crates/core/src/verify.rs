//! Property suites: conformality, composition, left-inverse roundtrips,
//! gradient checks against central differences, density normalization and the
//! stereographic oracle.
//!
//! Every check reports the measured worst case next to its tolerance. The
//! finite-difference reference always goes through plain forward evaluation,
//! never through the VJP code it is checking.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bijective::{ActNorm, AffineCoupling, BijectiveBlock, BijectiveLayer, InvConv1x1};
use crate::conformal::{
    compose_forward, compose_left_inverse, compose_log_conformal_factor, sct_denominator, ConditionalOrthogonal,
    ConformalBlock, ConformalLayer, ConformalRelu, Inversion, OrthoConv, Orthogonal, Padding, Scaling, Sct,
    Stereographic, Translation,
};
use crate::data::oracle::{oracle_embed, oracle_invert, oracle_lambda};
use crate::error::{CefError, Result};
use crate::flow::{full_change_of_variables, CefModel};
use crate::linalg::{
    fd_jacobian, max_abs_diff, norm, HouseholderStack, OrthoParam, PluMatrix, SkewOrthogonal, Tensor,
    DEFAULT_FD_STEP,
};
use crate::par::{map_indexed, ExecPolicy};
use crate::train::{batch_loss, batch_loss_and_grad, GradTarget, LossWeights};

/// One measured property.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Fraction of the tolerance consumed; above 1 means failure.
    pub used: f64,
}

impl Check {
    /// Passes when `measured < tolerance`.
    pub fn below(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, tolerance, passed: measured < tolerance, used: measured / tolerance }
    }

    /// Passes when `measured` lies in `[lo, hi]`; the tolerance column holds the
    /// half-width around the midpoint.
    pub fn within(name: impl Into<String>, measured: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance: (hi - lo) / 2.0,
            passed: measured >= lo && measured <= hi,
            used: (measured - (lo + hi) / 2.0).abs() / ((hi - lo) / 2.0),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: measured {:.3e}, tolerance {:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance
        )
    }
}

pub const SUITES: &[&str] = &["conformality", "composition", "roundtrip", "gradcheck", "normalization", "oracle"];

/// Runs a named suite (`all` runs every one).
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<Check>> {
    match name {
        "conformality" => conformality_suite(seed),
        "composition" => composition_suite(seed),
        "roundtrip" => roundtrip_suite(seed),
        "gradcheck" => gradcheck_suite(seed),
        "normalization" => normalization_suite(seed, 1_000_000),
        "oracle" => oracle_suite(seed),
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(run_suite(s, seed)?);
            }
            Ok(out)
        }
        other => Err(CefError::Config(format!("unknown suite '{other}' (expected one of {SUITES:?} or all)"))),
    }
}

// ---------------------------------------------------------------------------
// random blocks

/// Every conformal block type, with the orthogonal ones split by
/// parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Translation,
    OrthogonalHouseholder,
    OrthogonalSkew,
    Scaling,
    Inversion,
    Sct,
    Padding,
    ConformalRelu,
    ConditionalOrthogonal,
    OrthoConv,
    Stereographic,
}

impl BlockKind {
    pub const ALL: [BlockKind; 11] = [
        BlockKind::Translation,
        BlockKind::OrthogonalHouseholder,
        BlockKind::OrthogonalSkew,
        BlockKind::Scaling,
        BlockKind::Inversion,
        BlockKind::Sct,
        BlockKind::Padding,
        BlockKind::ConformalRelu,
        BlockKind::ConditionalOrthogonal,
        BlockKind::OrthoConv,
        BlockKind::Stereographic,
    ];
}

fn gauss<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn random_ortho<R: Rng + ?Sized>(dim: usize, skew: bool, rng: &mut R) -> OrthoParam {
    if skew {
        OrthoParam::Skew(SkewOrthogonal::random(dim, 0.8, rng))
    } else {
        OrthoParam::Householder(HouseholderStack::random(dim, dim, rng))
    }
}

/// A block of `kind` with random parameters. `dim` is the input dimension,
/// except for the image convolution (fixed `1×2×2`, `k = 2`) and the
/// stereographic embedding (fixed `2 → 3`).
pub fn random_layer<R: Rng + ?Sized>(kind: BlockKind, dim: usize, rng: &mut R) -> ConformalLayer {
    match kind {
        BlockKind::Translation => Translation::new(gauss(rng, dim, 1.0)).into(),
        BlockKind::OrthogonalHouseholder => Orthogonal::new(random_ortho(dim, false, rng)).into(),
        BlockKind::OrthogonalSkew => Orthogonal::new(random_ortho(dim, true, rng)).into(),
        BlockKind::Scaling => Scaling::new(dim, rng.random_range(-1.0..1.0)).into(),
        BlockKind::Inversion => Inversion { dim }.into(),
        BlockKind::Sct => Sct::new(gauss(rng, dim, 0.3)).into(),
        BlockKind::Padding => Padding::new(dim, dim + 2).expect("grows").into(),
        BlockKind::ConformalRelu => ConformalRelu { q: random_ortho(dim, rng.random(), rng) }.into(),
        BlockKind::ConditionalOrthogonal => {
            let skew = rng.random();
            ConditionalOrthogonal::new(random_ortho(dim, skew, rng), random_ortho(dim, !skew, rng))
                .expect("dims match")
                .into()
        }
        BlockKind::OrthoConv => {
            OrthoConv::new(1, 2, 2, 2, random_ortho(4, rng.random(), rng)).expect("tiles").into()
        }
        BlockKind::Stereographic => Stereographic::new(rng.random_range(0.5..2.0)).expect("positive").into(),
    }
}

/// Keeps sampled points a finite distance from singular and non-conformal
/// sets, so a finite-difference stencil of width `margin` stays on one piece.
pub fn admissible(block: &ConformalLayer, u: &[f64], margin: f64) -> bool {
    match block {
        ConformalLayer::Inversion(_) => norm(u) > 0.2,
        ConformalLayer::Sct(s) => sct_denominator(u, &s.b).abs() > 0.1,
        ConformalLayer::ConformalRelu(r) => {
            r.q.apply(u).map(|q| q.iter().all(|v| v.abs() > margin)).unwrap_or(false)
        }
        ConformalLayer::ConditionalOrthogonal(_) => (norm(u) - 1.0).abs() > margin,
        _ => true,
    }
}

fn random_point<R: Rng + ?Sized>(block: &ConformalLayer, rng: &mut R, margin: f64) -> Vec<f64> {
    loop {
        let u = gauss(rng, block.in_dim(), 1.0);
        if admissible(block, &u, margin) {
            return u;
        }
    }
}

/// `‖JᵀJ − λ²I‖_F / (λ²√m)` with `J` from central differences.
pub fn conformality_defect<F>(f: F, u: &[f64], log_lambda: f64, step: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let j = fd_jacobian(f, u, step)?;
    let gram = j.transpose().matmul(&j)?;
    let l2 = (2.0 * log_lambda).exp();
    let m = u.len();
    let defect = gram.add(&Tensor::identity(m).scale(-l2)).frobenius_norm();
    Ok(defect / (l2 * (m as f64).sqrt()))
}

fn kind_name(k: BlockKind) -> &'static str {
    match k {
        BlockKind::Translation => "translation",
        BlockKind::OrthogonalHouseholder => "orthogonal/householder",
        BlockKind::OrthogonalSkew => "orthogonal/skew-exp",
        BlockKind::Scaling => "scaling",
        BlockKind::Inversion => "inversion",
        BlockKind::Sct => "sct",
        BlockKind::Padding => "pad",
        BlockKind::ConformalRelu => "conformal_relu",
        BlockKind::ConditionalOrthogonal => "conditional_orthogonal",
        BlockKind::OrthoConv => "ortho_conv",
        BlockKind::Stereographic => "stereographic",
    }
}

// ---------------------------------------------------------------------------
// conformality and composition

pub const CONFORMALITY_TOL: f64 = 1e-4;

/// 100 random admissible points per block type, fresh parameters per point.
pub fn conformality_suite(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (ki, kind) in BlockKind::ALL.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (ki as u64) << 32);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let block = random_layer(kind, 3, &mut rng);
            let u = random_point(&block, &mut rng, 1e-3);
            let ll = block.log_conformal_factor(&u)?;
            worst = worst.max(conformality_defect(|v| block.forward(v), &u, ll, DEFAULT_FD_STEP)?);
        }
        out.push(Check::below(format!("conformality {}", kind_name(kind)), worst, CONFORMALITY_TOL));
    }
    Ok(out)
}

const STACK_KINDS: [BlockKind; 8] = [
    BlockKind::Translation,
    BlockKind::OrthogonalHouseholder,
    BlockKind::OrthogonalSkew,
    BlockKind::Scaling,
    BlockKind::Sct,
    BlockKind::Padding,
    BlockKind::ConditionalOrthogonal,
    BlockKind::Inversion,
];

/// Random `len`-block conformal stack starting from dimension `dim`. Padding
/// grows by one so a stack stays at most `dim + len` wide.
pub fn random_stack<R: Rng + ?Sized>(len: usize, dim: usize, rng: &mut R) -> Vec<ConformalLayer> {
    let mut d = dim;
    let mut blocks = Vec::with_capacity(len);
    for _ in 0..len {
        let kind = STACK_KINDS[rng.random_range(0..STACK_KINDS.len())];
        let b: ConformalLayer = match kind {
            BlockKind::Padding => Padding::new(d, d + 1).expect("grows").into(),
            BlockKind::Scaling => Scaling::new(d, rng.random_range(-0.5..0.5)).into(),
            k => random_layer(k, d, rng),
        };
        d = b.out_dim();
        blocks.push(b);
    }
    blocks
}

/// Point where every block of the stack sees an admissible input.
pub fn stack_point<R: Rng + ?Sized>(blocks: &[ConformalLayer], rng: &mut R, margin: f64) -> Option<Vec<f64>> {
    'outer: for _ in 0..1000 {
        let u = gauss(rng, blocks[0].in_dim(), 1.0);
        let mut cur = u.clone();
        for b in blocks {
            if !admissible(b, &cur, margin) || norm(&cur) > 1e3 {
                continue 'outer;
            }
            cur = match b.forward(&cur) {
                Ok(v) => v,
                Err(_) => continue 'outer,
            };
        }
        return Some(u);
    }
    None
}

pub fn composition_suite(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(101));
    let (mut conf, mut sum_gap, mut trip) = (0.0f64, 0.0f64, 0.0f64);
    let mut stacks = 0;
    while stacks < 100 {
        let blocks = random_stack(5, 3, &mut rng);
        let Some(u) = stack_point(&blocks, &mut rng, 1e-3) else { continue };
        stacks += 1;
        let ll = compose_log_conformal_factor(&blocks, &u)?;
        conf = conf.max(conformality_defect(|v| compose_forward(&blocks, v), &u, ll, DEFAULT_FD_STEP)?);

        // product of the per-block factors, computed block by block
        let mut cur = u.clone();
        let mut per_block = 0.0;
        for b in &blocks {
            per_block += b.log_conformal_factor(&cur)?;
            cur = b.forward(&cur)?;
        }
        // against ½·log det(JᵀJ)/m from the finite-difference Jacobian
        let j = fd_jacobian(|v| compose_forward(&blocks, v), &u, DEFAULT_FD_STEP)?;
        let gram = j.transpose().matmul(&j)?;
        let fd_ll = 0.5 * crate::linalg::dense_log_abs_det(&gram) / u.len() as f64;
        sum_gap = sum_gap.max((fd_ll - per_block).abs() / per_block.abs().max(1.0));

        let back = compose_left_inverse(&blocks, &compose_forward(&blocks, &u)?)?;
        trip = trip.max(max_abs_diff(&back, &u));
    }
    Ok(vec![
        Check::below("composite JᵀJ = (Πλᵢ)²I over 100 random 5-block stacks", conf, CONFORMALITY_TOL),
        Check::below("composite log λ = Σ log λᵢ vs finite-difference log-det", sum_gap, CONFORMALITY_TOL),
        Check::below("composite left-inverse roundtrip", trip, 1e-8),
    ])
}

// ---------------------------------------------------------------------------
// roundtrips

pub fn roundtrip_suite(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (ki, kind) in BlockKind::ALL.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(7 + ki as u64));
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let block = random_layer(kind, 4, &mut rng);
            let u = random_point(&block, &mut rng, 1e-9);
            let back = block.left_inverse(&block.forward(&u)?)?;
            worst = worst.max(max_abs_diff(&back, &u));
        }
        out.push(Check::below(format!("left-inverse {}", kind_name(kind)), worst, 1e-8));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(99));
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let stump = random_stump(4, 2, &mut rng);
        let z = gauss(&mut rng, 4, 1.0);
        let (y, _) = crate::bijective::stack_forward(&stump, &z)?;
        let (back, _) = crate::bijective::stack_inverse(&stump, &y)?;
        worst = worst.max(max_abs_diff(&back, &z));
    }
    out.push(Check::below("stump inverse(forward(z))", worst, 1e-8));
    Ok(out)
}

// ---------------------------------------------------------------------------
// stumps

/// `steps` Glow-style steps (ActNorm, 1×1 conv, coupling) with random,
/// non-trivial parameters on `dim` channels.
pub fn random_stump<R: Rng + ?Sized>(dim: usize, steps: usize, rng: &mut R) -> Vec<BijectiveLayer> {
    let mut out = Vec::with_capacity(3 * steps);
    for s in 0..steps {
        let mut a = ActNorm::identity(dim, 1);
        a.log_scale = gauss(rng, dim, 0.2);
        a.bias = gauss(rng, dim, 0.2);
        out.push(a.into());
        out.push(InvConv1x1::new(PluMatrix::random(dim, 0.3, rng), 1).into());
        let mut c = AffineCoupling::new(dim, s % 2, 8, rng).expect("dim ≥ 2");
        let p = gauss(rng, c.net.params.len(), 0.15);
        c.net.params = p;
        out.push(c.into());
    }
    out
}

// ---------------------------------------------------------------------------
// gradient checks

pub const GRADCHECK_TOL: f64 = 1e-4;

/// Normwise relative error `‖a − b‖ / max(‖a‖, ‖b‖)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = norm(a).max(norm(b)).max(1e-12);
    norm(&crate::linalg::sub(a, b)) / scale
}

fn fd_grad<F: Fn(&[f64]) -> Result<f64>>(f: F, x: &[f64], step: f64) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let plus = f(&probe)?;
        probe[i] = x[i] - step;
        let minus = f(&probe)?;
        probe[i] = x[i];
        g.push((plus - minus) / (2.0 * step));
    }
    Ok(g)
}

/// Worst relative error of a conformal block's VJPs (forward + log λ, and the
/// left-inverse) against central differences, input and parameter sides.
pub fn conformal_block_gradcheck<R: Rng + ?Sized>(block: &ConformalLayer, rng: &mut R) -> Result<f64> {
    let u = random_point(block, rng, 1e-2);
    let dy = gauss(rng, block.out_dim(), 1.0);
    let dl: f64 = rng.sample(StandardNormal);
    let objective = |b: &ConformalLayer, v: &[f64]| -> Result<f64> {
        let y = b.forward(v)?;
        Ok(crate::linalg::dot(&dy, &y) + dl * b.log_conformal_factor(v)?)
    };
    let mut raw = vec![0.0; block.raw_grad_len()];
    let du = block.vjp(&u, &dy, dl, &mut raw)?;
    let dp = block.reduce_grad(&raw);
    let fd_u = fd_grad(|v| objective(block, v), &u, DEFAULT_FD_STEP)?;
    let p0 = block.params();
    let fd_p = fd_grad(
        |p| {
            let mut b = block.clone();
            b.set_params(p);
            objective(&b, &u)
        },
        &p0,
        DEFAULT_FD_STEP,
    )?;
    let mut worst = rel_err(&du, &fd_u);
    if !p0.is_empty() {
        worst = worst.max(rel_err(&dp, &fd_p));
    }

    // left-inverse, evaluated on a point slightly off the range
    let mut x = block.forward(&u)?;
    for v in x.iter_mut() {
        *v += 1e-3 * rng.sample::<f64, _>(StandardNormal);
    }
    if let ConformalLayer::ConformalRelu(_) = block {
        // left-inverse is linear; any x works
    } else if !admissible(block, &block.left_inverse(&x)?, 1e-2) {
        return Ok(worst);
    }
    let du2 = gauss(rng, block.in_dim(), 1.0);
    let inv_obj = |b: &ConformalLayer, xv: &[f64]| -> Result<f64> { Ok(crate::linalg::dot(&du2, &b.left_inverse(xv)?)) };
    let mut raw = vec![0.0; block.raw_grad_len()];
    let dx = block.left_inverse_vjp(&x, &du2, &mut raw)?;
    let dp = block.reduce_grad(&raw);
    let fd_x = fd_grad(|v| inv_obj(block, v), &x, DEFAULT_FD_STEP)?;
    worst = worst.max(rel_err(&dx, &fd_x));
    if !p0.is_empty() {
        let fd_p = fd_grad(
            |p| {
                let mut b = block.clone();
                b.set_params(p);
                inv_obj(&b, &x)
            },
            &p0,
            DEFAULT_FD_STEP,
        )?;
        worst = worst.max(rel_err(&dp, &fd_p));
    }
    Ok(worst)
}

/// Same for a bijective block, both directions, including the log-det.
pub fn bijective_block_gradcheck<R: Rng + ?Sized>(block: &BijectiveLayer, rng: &mut R) -> Result<f64> {
    let d = block.dim();
    let z = gauss(rng, d, 1.0);
    let c = gauss(rng, d, 1.0);
    let k: f64 = rng.sample(StandardNormal);
    let p0 = block.params();
    let mut worst: f64 = 0.0;
    for inverse in [false, true] {
        let eval = |b: &BijectiveLayer, v: &[f64]| -> Result<f64> {
            let (o, ld) = if inverse { b.inverse(v)? } else { b.forward(v)? };
            Ok(crate::linalg::dot(&c, &o) + k * ld)
        };
        let mut raw = vec![0.0; block.raw_grad_len()];
        let dv = if inverse {
            block.inverse_vjp(&z, &c, k, &mut raw)?
        } else {
            block.forward_vjp(&z, &c, k, &mut raw)?
        };
        let dp = block.reduce_grad(&raw);
        worst = worst.max(rel_err(&dv, &fd_grad(|v| eval(block, v), &z, DEFAULT_FD_STEP)?));
        let fd_p = fd_grad(
            |p| {
                let mut b = block.clone();
                b.set_params(p);
                eval(&b, &z)
            },
            &p0,
            DEFAULT_FD_STEP,
        )?;
        worst = worst.max(rel_err(&dp, &fd_p));
    }
    Ok(worst)
}

/// Small CEF with every trainable block type: `m = 2`, `n = 3`.
pub fn tiny_model<R: Rng + ?Sized>(rng: &mut R) -> CefModel {
    let g: Vec<ConformalLayer> = vec![
        Scaling::new(2, 0.2).into(),
        Padding::new(2, 3).unwrap().into(),
        Sct::new(gauss(rng, 3, 0.2)).into(),
        Orthogonal::new(random_ortho(3, false, rng)).into(),
        Orthogonal::new(random_ortho(3, true, rng)).into(),
        Translation::new(gauss(rng, 3, 0.5)).into(),
    ];
    CefModel::new(2, g, random_stump(2, 2, rng)).expect("dims chain")
}

/// Off-manifold data for the tiny model: generated points plus noise.
pub fn tiny_data<R: Rng + ?Sized>(model: &CefModel, rows: usize, rng: &mut R) -> Result<Tensor> {
    let mut out = Vec::with_capacity(rows);
    for _ in 0..rows {
        let z = gauss(rng, model.latent_dim(), 0.7);
        let mut x = model.generate(&z)?;
        for v in x.iter_mut() {
            *v += 0.05 * rng.sample::<f64, _>(StandardNormal);
        }
        out.push(x);
    }
    Tensor::from_rows(&out, model.ambient_dim())
}

/// Relative error of the training-objective gradient against central
/// differences of the loss value.
pub fn objective_gradcheck(model: &CefModel, data: &Tensor, w: LossWeights, target: GradTarget) -> Result<f64> {
    let eval = batch_loss_and_grad(model, data, None, w, target, ExecPolicy::Sequential)?;
    let mut worst: f64 = 0.0;
    if matches!(target, GradTarget::Embedding | GradTarget::Both) {
        let fd = fd_grad(
            |p| {
                let mut mm = model.clone();
                mm.set_g_params(p)?;
                batch_loss(&mm, data, w)
            },
            &model.g_params(),
            DEFAULT_FD_STEP,
        )?;
        worst = worst.max(rel_err(&eval.grad_g, &fd));
    }
    if matches!(target, GradTarget::Stump | GradTarget::Both) {
        let fd = fd_grad(
            |p| {
                let mut mm = model.clone();
                mm.set_h_params(p)?;
                batch_loss(&mm, data, w)
            },
            &model.h_params(),
            DEFAULT_FD_STEP,
        )?;
        worst = worst.max(rel_err(&eval.grad_h, &fd));
    }
    Ok(worst)
}

pub fn gradcheck_suite(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (ki, kind) in BlockKind::ALL.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000 + ki as u64));
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let block = random_layer(kind, 3, &mut rng);
            worst = worst.max(conformal_block_gradcheck(&block, &mut rng)?);
        }
        out.push(Check::below(format!("vjp {}", kind_name(kind)), worst, GRADCHECK_TOL));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2000));
    for (name, dim) in [("actnorm", 3), ("inv_conv1x1", 4), ("affine_coupling", 4)] {
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let stump = random_stump(dim, 1, &mut rng);
            let block = match name {
                "actnorm" => &stump[0],
                "inv_conv1x1" => &stump[1],
                _ => &stump[2],
            };
            worst = worst.max(bijective_block_gradcheck(block, &mut rng)?);
        }
        out.push(Check::below(format!("vjp {name}"), worst, GRADCHECK_TOL));
    }
    // image-shaped ActNorm and 1×1 conv
    {
        let mut a = ActNorm::identity(2, 3);
        a.log_scale = gauss(&mut rng, 2, 0.3);
        a.bias = gauss(&mut rng, 2, 0.3);
        let c = InvConv1x1::new(PluMatrix::random(2, 0.3, &mut rng), 3);
        let w = bijective_block_gradcheck(&a.into(), &mut rng)?
            .max(bijective_block_gradcheck(&c.into(), &mut rng)?);
        out.push(Check::below("vjp actnorm/1x1 conv with spatial extent", w, GRADCHECK_TOL));
    }

    let model = tiny_model(&mut rng);
    let data = tiny_data(&model, 8, &mut rng)?;
    let cases = [
        ("warmup objective (reconstruction, g)", LossWeights { alpha: 1.0, beta_ll: 0.0 }, GradTarget::Embedding),
        ("sequential objective (likelihood, h)", LossWeights { alpha: 0.0, beta_ll: 1.0 }, GradTarget::Stump),
        ("joint objective (mixed, g and h)", LossWeights { alpha: 2.5, beta_ll: 0.7 }, GradTarget::Both),
    ];
    for (name, w, t) in cases {
        out.push(Check::below(format!("gradient {name}"), objective_gradcheck(&model, &data, w, t)?, GRADCHECK_TOL));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// normalization

const MC_CHUNK: usize = 10_000;

fn chunked_mean<F>(samples: usize, seed: u64, f: F) -> Result<f64>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync + Send,
{
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts = map_indexed(ExecPolicy::Parallel, chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let n = MC_CHUNK.min(samples - c * MC_CHUNK);
        let mut acc = 0.0;
        for _ in 0..n {
            acc += f(&mut rng)?;
        }
        Ok::<f64, CefError>(acc)
    });
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    Ok(total / samples as f64)
}

/// `∫ p(x) dx` for a square flow by importance sampling from `N(0, σ²I)`.
/// Plain, but the weights get heavy tails once the flow stretches space.
pub fn importance_normalization(model: &CefModel, samples: usize, sigma: f64, seed: u64) -> Result<f64> {
    let d = model.latent_dim();
    let log_q_const = -0.5 * d as f64 * (2.0 * std::f64::consts::PI * sigma * sigma).ln();
    chunked_mean(samples, seed, |rng| {
        let x = gauss(rng, d, sigma);
        let log_q = log_q_const - 0.5 * crate::linalg::norm_sq(&x) / (sigma * sigma);
        Ok((full_change_of_variables(model, &x)? - log_q).exp())
    })
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
fn cholesky(a: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = a[i * d + j] - (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum::<f64>();
            if i == j {
                if !(s > 0.0) {
                    return Err(CefError::Numeric("covariance is not positive definite".into()));
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Ok(l)
}

/// Same integral with a defensive proposal: an equal mixture of
/// `N(μ, 1.2²Σ)` and `N(μ, 2.5²Σ)`, with `μ, Σ` the moments of 20 000 draws
/// through the generative direction. The estimate stays unbiased whatever the
/// proposal; the wide component keeps the weights bounded.
pub fn adaptive_importance_normalization(model: &CefModel, samples: usize, seed: u64) -> Result<f64> {
    let d = model.latent_dim();
    let pilot = crate::flow::sample(model, 20_000, seed ^ 0x5eed, ExecPolicy::Parallel)?;
    let n = pilot.rows() as f64;
    let mut mean = vec![0.0; d];
    for i in 0..pilot.rows() {
        crate::linalg::axpy(1.0 / n, pilot.row(i), &mut mean);
    }
    let mut cov = vec![0.0; d * d];
    for i in 0..pilot.rows() {
        let c = crate::linalg::sub(pilot.row(i), &mean);
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] += c[a] * c[b] / (n - 1.0);
            }
        }
    }
    let l = cholesky(&cov, d)?;
    let log_det_l: f64 = (0..d).map(|i| l[i * d + i].ln()).sum();
    let scales = [1.2, 2.5];
    let log_norm = |s: f64| -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - log_det_l - d as f64 * s.ln();
    chunked_mean(samples, seed, |rng| {
        let s = scales[usize::from(rng.random::<bool>())];
        let e = gauss(rng, d, 1.0);
        let x: Vec<f64> = (0..d).map(|i| mean[i] + s * (0..=i).map(|k| l[i * d + k] * e[k]).sum::<f64>()).collect();
        // whiten once, reuse for both components
        let c = crate::linalg::sub(&x, &mean);
        let mut w = vec![0.0; d];
        for i in 0..d {
            w[i] = (c[i] - (0..i).map(|k| l[i * d + k] * w[k]).sum::<f64>()) / l[i * d + i];
        }
        let r2 = crate::linalg::norm_sq(&w);
        let q: f64 = scales.iter().map(|&s| 0.5 * (log_norm(s) - 0.5 * r2 / (s * s)).exp()).sum();
        Ok((full_change_of_variables(model, &x)? - q.ln()).exp())
    })
}

/// Monte Carlo surface integral of the model density over the unit sphere,
/// `4π·mean p(x)` for `x` uniform on the sphere.
pub fn sphere_surface_integral(model: &CefModel, samples: usize, seed: u64) -> Result<f64> {
    let mean = chunked_mean(samples, seed, |rng| {
        let v = gauss(rng, 3, 1.0);
        let n = norm(&v);
        let x: Vec<f64> = v.iter().map(|a| a / n).collect();
        match model.log_prob(&x) {
            Ok(r) => Ok(r.log_prob.exp()),
            // only the north pole itself is outside the range
            Err(CefError::Singularity(_)) => Ok(0.0),
            Err(e) => Err(e),
        }
    })?;
    Ok(4.0 * std::f64::consts::PI * mean)
}

pub fn normalization_suite(seed: u64, sphere_points: usize) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3000));
    for i in 0..3 {
        let model = CefModel::new(4, vec![], random_stump(4, 2, &mut rng))?;
        let est = adaptive_importance_normalization(&model, 1_000_000, seed.wrapping_add(i))?;
        out.push(Check::within(format!("∫p dx, random 4-d stump #{i}"), est, 0.98, 1.02));
    }
    let oracle = |h: Vec<BijectiveLayer>| -> Result<CefModel> {
        CefModel::new(2, vec![Stereographic::new(1.0)?.into()], h)
    };
    let est = sphere_surface_integral(&oracle(vec![])?, sphere_points, seed.wrapping_add(10))?;
    out.push(Check::within("∫p dA on the sphere, stereographic g, identity h", est, 0.98, 1.02));
    let est = sphere_surface_integral(&oracle(random_stump(2, 2, &mut rng))?, sphere_points, seed.wrapping_add(11))?;
    out.push(Check::within("∫p dA on the sphere, stereographic g, random h", est, 0.98, 1.02));
    Ok(out)
}

// ---------------------------------------------------------------------------
// stereographic oracle

pub fn oracle_suite(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(4000));
    let (mut conf, mut radius, mut trip_z, mut trip_x) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let r = rng.random_range(0.5..2.0);
        let z = gauss(&mut rng, 2, 1.5);
        let lambda = oracle_lambda(&z, r);
        conf = conf.max(conformality_defect(|v| Ok(oracle_embed(v, r).to_vec()), &z, lambda.ln(), DEFAULT_FD_STEP)?);
        let x = oracle_embed(&z, r);
        radius = radius.max((norm(&x) - r).abs());
        trip_z = trip_z.max(max_abs_diff(&oracle_invert(&x, r)?, &z));

        let v = gauss(&mut rng, 3, 1.0);
        let p: Vec<f64> = v.iter().map(|a| r * a / norm(&v)).collect();
        if r - p[2] > 1e-3 {
            let back = oracle_embed(&oracle_invert(&p, r)?, r);
            trip_x = trip_x.max(max_abs_diff(&back, &p));
        }
    }
    Ok(vec![
        Check::below("stereographic JᵀJ = λ²I with λ = 2r²/(‖z‖²+r²)", conf, 1e-6),
        Check::below("stereographic ‖g(z)‖ = r", radius, 1e-12),
        Check::below("stereographic invert(embed(z)) = z", trip_z, 1e-8),
        Check::below("stereographic embed(invert(x)) = x", trip_x, 1e-8),
    ])
}
