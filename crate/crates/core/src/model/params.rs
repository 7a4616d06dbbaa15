//! Trainable parameters and the mirrored gradient containers.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{matvec_acc, matvec_t_acc, outer_acc, Tensor};

use super::config::{ModelConfig, ModelKind};

/// Anything that owns an ordered list of trainable tensors.
///
/// The order is fixed and is the order used by checkpoints, the optimizer and
/// flattening for gradient checks.
pub trait ParamSet: Clone {
    fn tensors(&self) -> Vec<&Tensor>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;
    fn tensor_names(&self) -> Vec<String>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
        out
    }

    fn flatten(&self) -> Vec<f64> {
        self.tensors()
            .into_iter()
            .flat_map(|t| t.data().iter().copied())
            .collect()
    }

    fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::dim(
                "assign_flat",
                &[self.num_params()],
                &[flat.len()],
            ));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// `self += scale * other`, tensor by tensor.
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.data_mut()
                .iter_mut()
                .zip(b.data())
                .for_each(|(x, y)| *x += scale * y);
        }
    }

    fn same_shapes(&self, other: &Self) -> bool {
        let a = self.tensors();
        let b = other.tensors();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.shape() == y.shape())
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }
}

/// `y = W x + b` with `W` stored `[out × in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Affine {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[out_dim, in_dim]),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(out_dim: usize, in_dim: usize, rng: &mut Rng) -> Self {
        let s = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let data = (0..out_dim * in_dim)
            .map(|_| rng.uniform_range(-s, s))
            .collect();
        Self {
            weight: Tensor::from_vec(&[out_dim, in_dim], data).expect("shape"),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.data().to_vec();
        matvec_acc(self.weight.data(), self.in_dim(), x, &mut out);
        out
    }

    /// Accumulates `dW += dz ⊗ x`, `db += dz` into `grad` and, if asked,
    /// `dx += Wᵀ dz`.
    pub(crate) fn backward(
        &self,
        grad: &mut Affine,
        x: &[f64],
        dz: &[f64],
        dx: Option<&mut [f64]>,
    ) {
        outer_acc(grad.weight.data_mut(), dz, x);
        grad.bias
            .data_mut()
            .iter_mut()
            .zip(dz)
            .for_each(|(b, g)| *b += g);
        if let Some(dx) = dx {
            matvec_t_acc(self.weight.data(), self.in_dim(), dz, dx);
        }
    }
}

impl ParamSet for Affine {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn tensor_names(&self) -> Vec<String> {
        vec!["weight".into(), "bias".into()]
    }
}

/// One tanh hidden layer followed by a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub hidden: Affine,
    pub out: Affine,
}

impl Mlp {
    /// Returns `(hidden activations, output)`.
    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut a = self.hidden.apply(x);
        a.iter_mut().for_each(|v| *v = v.tanh());
        let out = self.out.apply(&a);
        (a, out)
    }

    pub(crate) fn backward(&self, grad: &mut Mlp, x: &[f64], act: &[f64], dout: &[f64]) {
        let mut da = vec![0.0; act.len()];
        self.out.backward(&mut grad.out, act, dout, Some(&mut da));
        let dz: Vec<f64> = da.iter().zip(act).map(|(g, a)| g * (1.0 - a * a)).collect();
        self.hidden.backward(&mut grad.hidden, x, &dz, None);
    }
}

/// Parameters of the recurrent family (attention, average-pooled and
/// max-pooled LSTMs).
///
/// Layer 1 of the stack maps `[h; x] ∈ R^(d+D)` to the four gate
/// pre-activations in `R^(4d)`, upper layers map `[h; h_below] ∈ R^(2d)`.
/// The input columns follow the hidden-state columns. Gate rows are ordered
/// input, forget, output, candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub lstm: Vec<Affine>,
    /// Location-softmax weights `[K² × d]` plus bias; present only for the
    /// attention model.
    pub attn: Option<Affine>,
    pub init_c: Mlp,
    pub init_h: Mlp,
    pub cls_hidden: Affine,
    pub cls_out: Affine,
}

impl ModelParams {
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        Self::build(config, None)
    }

    /// Glorot-uniform weights, zero biases except the forget gate bias at 1.
    pub fn init(config: ModelConfig, rng: &mut Rng) -> Result<Self> {
        Self::build(config, Some(rng))
    }

    fn build(config: ModelConfig, mut rng: Option<&mut Rng>) -> Result<Self> {
        config.validate()?;
        if !config.kind.is_recurrent() {
            return Err(Error::Contract(format!(
                "{} is not a recurrent model kind",
                config.kind
            )));
        }
        let d = config.hidden;
        let mut make = |out: usize, inp: usize| match rng.as_deref_mut() {
            Some(r) => Affine::glorot(out, inp, r),
            None => Affine::zeros(out, inp),
        };
        let mut lstm = Vec::with_capacity(config.layers);
        for layer in 0..config.layers {
            let input = if layer == 0 { config.feat_dim } else { d };
            lstm.push(make(4 * d, d + input));
        }
        let attn = (config.kind == ModelKind::Attention).then(|| make(config.regions(), d));
        let init_c = Mlp {
            hidden: make(d, config.feat_dim),
            out: make(config.layers * d, d),
        };
        let init_h = Mlp {
            hidden: make(d, config.feat_dim),
            out: make(config.layers * d, d),
        };
        let cls_hidden = make(d, d);
        let cls_out = make(config.classes, d);
        let initialized = rng.is_some();
        if initialized {
            for layer in &mut lstm {
                layer.bias.data_mut()[d..2 * d].fill(1.0);
            }
        }
        Ok(Self {
            config,
            lstm,
            attn,
            init_c,
            init_h,
            cls_hidden,
            cls_out,
        })
    }

    pub fn attn(&self) -> Result<&Affine> {
        self.attn.as_ref().ok_or_else(|| {
            Error::Contract(format!(
                "{} model has no location softmax",
                self.config.kind
            ))
        })
    }

    /// Same weights under another recurrent kind; the location softmax is
    /// dropped or zero-filled as needed.
    pub fn rekind(&self, kind: ModelKind) -> Result<Self> {
        if !kind.is_recurrent() {
            return Err(Error::Contract(format!("cannot rekind to {kind}")));
        }
        let mut out = self.clone();
        out.config.kind = kind;
        out.attn = match (kind, &self.attn) {
            (ModelKind::Attention, Some(a)) => Some(a.clone()),
            (ModelKind::Attention, None) => {
                Some(Affine::zeros(self.config.regions(), self.config.hidden))
            }
            _ => None,
        };
        Ok(out)
    }

    fn affines(&self) -> Vec<(String, &Affine)> {
        let mut out: Vec<(String, &Affine)> = Vec::new();
        for (i, layer) in self.lstm.iter().enumerate() {
            out.push((format!("lstm{i}"), layer));
        }
        if let Some(a) = &self.attn {
            out.push(("attn".into(), a));
        }
        out.push(("init_c.hidden".into(), &self.init_c.hidden));
        out.push(("init_c.out".into(), &self.init_c.out));
        out.push(("init_h.hidden".into(), &self.init_h.hidden));
        out.push(("init_h.out".into(), &self.init_h.out));
        out.push(("cls_hidden".into(), &self.cls_hidden));
        out.push(("cls_out".into(), &self.cls_out));
        out
    }
}

impl ParamSet for ModelParams {
    fn tensors(&self) -> Vec<&Tensor> {
        self.affines()
            .into_iter()
            .flat_map(|(_, a)| [&a.weight, &a.bias])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        for layer in &mut self.lstm {
            out.push(&mut layer.weight);
            out.push(&mut layer.bias);
        }
        if let Some(a) = &mut self.attn {
            out.push(&mut a.weight);
            out.push(&mut a.bias);
        }
        for a in [
            &mut self.init_c.hidden,
            &mut self.init_c.out,
            &mut self.init_h.hidden,
            &mut self.init_h.out,
            &mut self.cls_hidden,
            &mut self.cls_out,
        ] {
            out.push(&mut a.weight);
            out.push(&mut a.bias);
        }
        out
    }

    fn tensor_names(&self) -> Vec<String> {
        self.affines()
            .into_iter()
            .flat_map(|(n, _)| [format!("{n}.weight"), format!("{n}.bias")])
            .collect()
    }
}

/// Softmax regression over the whole flattened `K·K·D` cube, one prediction
/// per step.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionParams {
    pub config: ModelConfig,
    pub readout: Affine,
}

impl RegressionParams {
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        Self::check(&config)?;
        Ok(Self {
            config,
            readout: Affine::zeros(config.classes, config.regions() * config.feat_dim),
        })
    }

    pub fn init(config: ModelConfig, rng: &mut Rng) -> Result<Self> {
        Self::check(&config)?;
        Ok(Self {
            config,
            readout: Affine::glorot(config.classes, config.regions() * config.feat_dim, rng),
        })
    }

    fn check(config: &ModelConfig) -> Result<()> {
        config.validate()?;
        if config.kind != ModelKind::SoftmaxRegression {
            return Err(Error::Contract(format!(
                "regression parameters need kind softmax_regression, got {}",
                config.kind
            )));
        }
        Ok(())
    }
}

impl ParamSet for RegressionParams {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.readout.weight, &self.readout.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.readout.weight, &mut self.readout.bias]
    }

    fn tensor_names(&self) -> Vec<String> {
        vec!["readout.weight".into(), "readout.bias".into()]
    }
}

/// Any of the four model kinds behind one type.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Network {
    Recurrent(ModelParams),
    Regression(RegressionParams),
}

/// Gradients mirror the parameter structure exactly.
pub type GradientSet = ModelParams;

impl Network {
    pub fn init(config: ModelConfig, rng: &mut Rng) -> Result<Self> {
        Ok(match config.kind {
            ModelKind::SoftmaxRegression => {
                Network::Regression(RegressionParams::init(config, rng)?)
            }
            _ => Network::Recurrent(ModelParams::init(config, rng)?),
        })
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        Ok(match config.kind {
            ModelKind::SoftmaxRegression => Network::Regression(RegressionParams::zeros(config)?),
            _ => Network::Recurrent(ModelParams::zeros(config)?),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            Network::Recurrent(p) => &p.config,
            Network::Regression(p) => &p.config,
        }
    }

    pub fn as_recurrent(&self) -> Result<&ModelParams> {
        match self {
            Network::Recurrent(p) => Ok(p),
            Network::Regression(_) => Err(Error::Contract(
                "operation needs a recurrent model, got softmax_regression".into(),
            )),
        }
    }
}

impl ParamSet for Network {
    fn tensors(&self) -> Vec<&Tensor> {
        match self {
            Network::Recurrent(p) => p.tensors(),
            Network::Regression(p) => p.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Network::Recurrent(p) => p.tensors_mut(),
            Network::Regression(p) => p.tensors_mut(),
        }
    }

    fn tensor_names(&self) -> Vec<String> {
        match self {
            Network::Recurrent(p) => p.tensor_names(),
            Network::Regression(p) => p.tensor_names(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            kind: ModelKind::Attention,
            grid: 3,
            feat_dim: 8,
            hidden: 6,
            layers: 2,
            classes: 3,
            steps: 4,
            dropout: 0.0,
        }
    }

    #[test]
    fn shapes_follow_config() {
        let p = ModelParams::init(tiny(), &mut Rng::new(0)).unwrap();
        assert_eq!(p.lstm[0].weight.shape(), [24, 6 + 8]);
        assert_eq!(p.lstm[1].weight.shape(), [24, 12]);
        assert_eq!(p.attn().unwrap().weight.shape(), [9, 6]);
        assert_eq!(p.init_c.out.weight.shape(), [12, 6]);
        assert_eq!(p.cls_out.weight.shape(), [3, 6]);
        assert_eq!(p.tensors().len(), p.tensor_names().len());
    }

    #[test]
    fn init_sets_forget_bias_only() {
        let p = ModelParams::init(tiny(), &mut Rng::new(0)).unwrap();
        let b = p.lstm[0].bias.data();
        assert!(b[..6].iter().all(|&v| v == 0.0));
        assert!(b[6..12].iter().all(|&v| v == 1.0));
        assert!(b[12..].iter().all(|&v| v == 0.0));
        let s = (6.0f64 / (14 + 24) as f64).sqrt();
        assert!(p.lstm[0].weight.data().iter().all(|v| v.abs() <= s));
    }

    #[test]
    fn flatten_round_trip() {
        let p = ModelParams::init(tiny(), &mut Rng::new(3)).unwrap();
        let flat = p.flatten();
        let mut q = p.zeros_like();
        q.assign_flat(&flat).unwrap();
        assert_eq!(p, q);
        assert!(q.assign_flat(&flat[1..]).is_err());
    }

    #[test]
    fn pooled_kinds_have_no_attention() {
        let p = ModelParams::init(tiny().with_kind(ModelKind::AvgPool), &mut Rng::new(0)).unwrap();
        assert!(p.attn.is_none());
        assert!(p.attn().is_err());
        assert!(ModelParams::zeros(tiny().with_kind(ModelKind::SoftmaxRegression)).is_err());
    }
}
