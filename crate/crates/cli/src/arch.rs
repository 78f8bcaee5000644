//! Architectures as data: block-spec lists that build a [`CefModel`] and are
//! stored verbatim in checkpoints.

use rand::Rng;
use serde::{Deserialize, Serialize};

use cef_core::bijective::{ActNorm, AffineCoupling, BijectiveLayer, InvConv1x1};
use cef_core::conformal::{
    ConditionalOrthogonal, ConformalBlock, ConformalLayer, ConformalRelu, Inversion, OrthoConv, Orthogonal,
    Padding, Scaling, Sct, Stereographic, Translation,
};
use cef_core::flow::CefModel;
use cef_core::linalg::{HouseholderStack, OrthoParam, PluMatrix, SkewOrthogonal};
use cef_core::{CefError, Result};

/// How an orthogonal matrix is parameterized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OrthoKind {
    /// Product of Householder reflections; random unit vectors at init.
    Householder,
    /// Exponential of a skew-symmetric generator; identity at init.
    #[default]
    Skew,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConformalSpec {
    Pad {
        out: usize,
    },
    Translation {},
    Scaling {},
    Inversion {},
    Sct {},
    Orthogonal {
        #[serde(default)]
        param: OrthoKind,
        /// Householder only; defaults to the dimension.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reflections: Option<usize>,
    },
    ConformalRelu {
        #[serde(default)]
        param: OrthoKind,
    },
    ConditionalOrthogonal {
        #[serde(default)]
        param: OrthoKind,
    },
    OrthoConv {
        channels: usize,
        height: usize,
        width: usize,
        kernel: usize,
        #[serde(default)]
        param: OrthoKind,
    },
    Stereographic {
        radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BijectiveSpec {
    Actnorm {
        #[serde(default = "one")]
        spatial: usize,
    },
    InvConv1x1 {
        #[serde(default = "one")]
        spatial: usize,
    },
    AffineCoupling {
        #[serde(default = "default_hidden")]
        hidden: usize,
    },
}

fn one() -> usize {
    1
}

fn default_hidden() -> usize {
    64
}

/// Latent dimension plus both block lists, `h` in generative order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub latent_dim: usize,
    #[serde(default)]
    pub g: Vec<ConformalSpec>,
    #[serde(default)]
    pub h: Vec<BijectiveSpec>,
}

fn ortho<R: Rng + ?Sized>(kind: OrthoKind, dim: usize, reflections: Option<usize>, rng: &mut R) -> OrthoParam {
    match kind {
        OrthoKind::Skew => OrthoParam::Skew(SkewOrthogonal::identity(dim)),
        OrthoKind::Householder => {
            OrthoParam::Householder(HouseholderStack::random(dim, reflections.unwrap_or(dim), rng))
        }
    }
}

fn build_conformal<R: Rng + ?Sized>(spec: &ConformalSpec, dim: usize, rng: &mut R) -> Result<ConformalLayer> {
    let layer: ConformalLayer = match *spec {
        ConformalSpec::Pad { out } => Padding::new(dim, out)?.into(),
        ConformalSpec::Translation {} => Translation::zeros(dim).into(),
        ConformalSpec::Scaling {} => Scaling::new(dim, 0.0).into(),
        ConformalSpec::Inversion {} => Inversion { dim }.into(),
        ConformalSpec::Sct {} => Sct::zeros(dim).into(),
        ConformalSpec::Orthogonal { param, reflections } => {
            if reflections == Some(0) {
                return Err(CefError::Config("orthogonal layer needs at least one reflection".into()));
            }
            Orthogonal::new(ortho(param, dim, reflections, rng)).into()
        }
        ConformalSpec::ConformalRelu { param } => ConformalRelu { q: ortho(param, dim, None, rng) }.into(),
        ConformalSpec::ConditionalOrthogonal { param } => {
            ConditionalOrthogonal::new(ortho(param, dim, None, rng), ortho(param, dim, None, rng))?.into()
        }
        ConformalSpec::OrthoConv { channels, height, width, kernel, param } => {
            let filter = ortho(param, channels * kernel * kernel, None, rng);
            OrthoConv::new(channels, height, width, kernel, filter)?.into()
        }
        ConformalSpec::Stereographic { radius } => Stereographic::new(radius)?.into(),
    };
    if layer.in_dim() != dim {
        return Err(CefError::Shape(format!(
            "{} expects input dimension {}, previous block gives {dim}",
            layer.name(),
            layer.in_dim()
        )));
    }
    Ok(layer)
}

impl Architecture {
    /// Builds a freshly initialized model; every dimension is checked here.
    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CefModel> {
        if self.latent_dim == 0 {
            return Err(CefError::Config("latent_dim must be at least 1".into()));
        }
        let mut d = self.latent_dim;
        let mut g = Vec::with_capacity(self.g.len());
        for (i, spec) in self.g.iter().enumerate() {
            let layer = build_conformal(spec, d, rng).map_err(|e| CefError::Config(format!("g[{i}]: {e}")))?;
            d = layer.out_dim();
            g.push(layer);
        }
        let m = self.latent_dim;
        let spatial_of = |s: usize, what: &str, i: usize| -> Result<usize> {
            if s == 0 || m % s != 0 {
                return Err(CefError::Config(format!("h[{i}]: {what} spatial size {s} does not divide {m}")));
            }
            Ok(m / s)
        };
        let mut h = Vec::with_capacity(self.h.len());
        let mut couplings = 0;
        for (i, spec) in self.h.iter().enumerate() {
            let layer: BijectiveLayer = match *spec {
                BijectiveSpec::Actnorm { spatial } => ActNorm::new(spatial_of(spatial, "actnorm", i)?, spatial).into(),
                BijectiveSpec::InvConv1x1 { spatial } => {
                    InvConv1x1::new(PluMatrix::identity(spatial_of(spatial, "inv_conv1x1", i)?), spatial).into()
                }
                BijectiveSpec::AffineCoupling { hidden } => {
                    if hidden == 0 {
                        return Err(CefError::Config(format!("h[{i}]: coupling needs hidden width ≥ 1")));
                    }
                    let c = AffineCoupling::new(m, couplings % 2, hidden, rng)
                        .map_err(|e| CefError::Config(format!("h[{i}]: {e}")))?;
                    couplings += 1;
                    c.into()
                }
            };
            h.push(layer);
        }
        CefModel::new(m, g, h)
    }
}
