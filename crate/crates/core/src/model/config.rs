use crate::error::{Error, Result};

/// Which network a parameter set describes.
///
/// The two pooled variants share the attention model's LSTM stack and
/// classifier but have no location softmax. The regression baseline reads the
/// whole flattened cube through one affine map per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Attention,
    AvgPool,
    MaxPool,
    SoftmaxRegression,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Attention,
        ModelKind::AvgPool,
        ModelKind::MaxPool,
        ModelKind::SoftmaxRegression,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Attention => "attention",
            ModelKind::AvgPool => "avg_pool",
            ModelKind::MaxPool => "max_pool",
            ModelKind::SoftmaxRegression => "softmax_regression",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            ModelKind::Attention => 0,
            ModelKind::AvgPool => 1,
            ModelKind::MaxPool => 2,
            ModelKind::SoftmaxRegression => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn is_recurrent(self) -> bool {
        self != ModelKind::SoftmaxRegression
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind {s:?}")))
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Shape hyperparameters of a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Grid side `K`; a frame has `K * K` feature slices.
    pub grid: usize,
    /// Slice dimensionality `D`.
    pub feat_dim: usize,
    /// Width `d` of the LSTM hidden/cell state and of the classifier hidden layer.
    pub hidden: usize,
    pub layers: usize,
    pub classes: usize,
    /// Time steps per block.
    pub steps: usize,
    /// Dropout probability on the non-recurrent connections.
    pub dropout: f64,
}

impl ModelConfig {
    /// The configuration reported for the real datasets: 7×7×1024 cubes,
    /// three LSTM layers, 30-step blocks and dropout 0.5. `hidden` was 512 or
    /// 1024 depending on the dataset.
    pub fn reference(classes: usize, hidden: usize) -> Self {
        Self {
            kind: ModelKind::Attention,
            grid: 7,
            feat_dim: 1024,
            hidden,
            layers: 3,
            classes,
            steps: 30,
            dropout: 0.5,
        }
    }

    pub fn regions(&self) -> usize {
        self.grid * self.grid
    }

    pub fn with_kind(mut self, kind: ModelKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.grid >= 1, "grid must be >= 1"),
            (self.feat_dim >= 1, "feat_dim must be >= 1"),
            (self.hidden >= 1, "hidden must be >= 1"),
            (self.layers >= 1, "layers must be >= 1"),
            (self.classes >= 2, "classes must be >= 2"),
            (self.steps >= 1, "steps must be >= 1"),
            (
                (0.0..1.0).contains(&self.dropout),
                "dropout must lie in [0, 1)",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Config(format!("{msg}: {self:?}"))),
            None => Ok(()),
        }
    }
}
