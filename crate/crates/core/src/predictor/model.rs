use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Matrix, PredictorError};

pub const DEFAULT_LAYERS: usize = 3;
pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_EPOCHS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative at pre-activation `x` (0 at the ReLU kink).
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// h_{l-1} × h_l
    pub w_self: Matrix,
    /// h_{l-1} × h_l
    pub w_nbr: Matrix,
}

/// L mean-aggregation message-passing layers and the linking score vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    /// h_0 .. h_L
    pub dims: Vec<usize>,
    pub layers: Vec<Layer>,
    /// `[w_node; w_query]`, length 2·h_L
    pub score: Vec<f64>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub seed: u64,
    /// Free-form `key value` metadata (encoder provenance, training run).
    pub meta: Vec<(String, String)>,
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Matrix {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
    Matrix::from_vec(rows, cols, data)
}

impl GnnModel {
    /// Xavier-uniform initialized model with layer widths `dims`.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self, PredictorError> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(PredictorError::Config(format!("bad layer dims {dims:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        for w in dims.windows(2) {
            let w_self = xavier(&mut rng, w[0], w[1], w[0], w[1]);
            let w_nbr = xavier(&mut rng, w[0], w[1], w[0], w[1]);
            layers.push(Layer { w_self, w_nbr });
        }
        let h = *dims.last().expect("non-empty");
        let score = xavier(&mut rng, 2 * h, 1, 2 * h, 1).as_slice().to_vec();
        Ok(GnnModel {
            dims: dims.to_vec(),
            layers,
            score,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
            seed,
            meta: Vec::new(),
        })
    }

    /// `layers` layers of width `hidden` (default: the input dimension).
    pub fn with_layers(
        input_dim: usize,
        layers: usize,
        hidden: Option<usize>,
        seed: u64,
    ) -> Result<Self, PredictorError> {
        if layers == 0 {
            return Err(PredictorError::Config("at least one layer is required".into()));
        }
        let h = hidden.unwrap_or(input_dim);
        let mut dims = vec![input_dim];
        dims.extend(std::iter::repeat_n(h, layers));
        GnnModel::new(&dims, seed)
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("non-empty")
    }

    /// Activation of layer `l` (0-based).
    pub fn activation(&self, l: usize) -> Activation {
        if l + 1 == self.layers.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.meta.push((key.to_string(), value)),
        }
    }

    pub fn encoder_provenance(&self) -> Option<&str> {
        self.meta_value("encoder")
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w_self.as_slice().len() + l.w_nbr.as_slice().len())
            .sum::<usize>()
            + self.score.len()
    }

    /// Parameters in a fixed order: per layer W_self then W_nbr, then W.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.w_self.as_slice());
            out.extend_from_slice(l.w_nbr.as_slice());
        }
        out.extend_from_slice(&self.score);
        out
    }

    pub fn set_flat(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.num_params(), "parameter count");
        let mut at = 0;
        for l in &mut self.layers {
            for m in [&mut l.w_self, &mut l.w_nbr] {
                let n = m.as_slice().len();
                m.as_mut_slice().copy_from_slice(&values[at..at + n]);
                at += n;
            }
        }
        self.score.copy_from_slice(&values[at..]);
    }

    pub fn is_finite(&self) -> bool {
        self.flat().iter().all(|v| v.is_finite())
    }

    /// Text format: header, dims, activations, seed, metadata, then every
    /// matrix row-major at 9 significant digits, then W.
    pub fn to_text(&self) -> String {
        let mut out = String::from("rsg-gnn 1\n");
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        writeln!(out, "dims {}", dims.join(" ")).unwrap();
        writeln!(
            out,
            "activation {} {}",
            self.hidden_activation.as_str(),
            self.output_activation.as_str()
        )
        .unwrap();
        writeln!(out, "seed {}", self.seed).unwrap();
        for (k, v) in &self.meta {
            writeln!(out, "meta {k} {v}").unwrap();
        }
        let row = |out: &mut String, values: &[f64]| {
            let cells: Vec<String> = values.iter().map(|v| format!("{v:.8e}")).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        };
        for (i, l) in self.layers.iter().enumerate() {
            for (name, m) in [("self", &l.w_self), ("nbr", &l.w_nbr)] {
                writeln!(out, "layer {} {name} {} {}", i + 1, m.rows(), m.cols()).unwrap();
                for r in 0..m.rows() {
                    row(&mut out, m.row(r));
                }
            }
        }
        writeln!(out, "score {}", self.score.len()).unwrap();
        row(&mut out, &self.score);
        out
    }

    pub fn from_text(text: &str) -> Result<Self, PredictorError> {
        let mut lines = text.lines().enumerate().peekable();
        let err = |line: usize, message: &str| PredictorError::Format {
            line: line + 1,
            message: message.to_string(),
        };
        match lines.next() {
            Some((_, "rsg-gnn 1")) => {}
            _ => return Err(err(0, "expected `rsg-gnn 1` header")),
        }
        let mut dims = Vec::new();
        let mut activations = (Activation::Relu, Activation::Identity);
        let mut seed = 0;
        let mut meta = Vec::new();
        while let Some(&(i, line)) = lines.peek() {
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            match key {
                "dims" => {
                    dims = rest
                        .split_whitespace()
                        .map(|d| d.parse().map_err(|_| err(i, "bad dims")))
                        .collect::<Result<_, _>>()?
                }
                "activation" => {
                    let mut parts = rest.split_whitespace().map(Activation::parse);
                    match (parts.next().flatten(), parts.next().flatten()) {
                        (Some(h), Some(o)) => activations = (h, o),
                        _ => return Err(err(i, "bad activation")),
                    }
                }
                "seed" => seed = rest.trim().parse().map_err(|_| err(i, "bad seed"))?,
                "meta" => {
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    meta.push((k.to_string(), v.to_string()));
                }
                _ => break,
            }
            lines.next();
        }
        let mut model = GnnModel::new(&dims, 0).map_err(|_| err(1, "bad dims"))?;
        model.hidden_activation = activations.0;
        model.output_activation = activations.1;
        model.seed = seed;
        model.meta = meta;

        let total = text.lines().count();
        let rest: Vec<(usize, &str)> = lines.collect();
        let mut cursor = rest.into_iter();
        let mut next = || cursor.next().ok_or_else(|| err(total, "truncated model"));
        let expect_section = |line: (usize, &str), prefix: &str| {
            if line.1.starts_with(prefix) {
                Ok(())
            } else {
                Err(err(line.0, &format!("expected `{prefix}` section")))
            }
        };
        let read_row = |(i, line): (usize, &str), expected: usize| -> Result<Vec<f64>, PredictorError> {
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| err(i, "bad number")))
                .collect::<Result<_, _>>()?;
            if values.len() != expected || values.iter().any(|v| !v.is_finite()) {
                return Err(err(i, "row has wrong length or non-finite values"));
            }
            Ok(values)
        };
        for l in 0..model.layers.len() {
            let (rows, cols) = (model.dims[l], model.dims[l + 1]);
            for which in ["self", "nbr"] {
                expect_section(next()?, &format!("layer {} {which} ", l + 1))?;
                let mut data = Vec::with_capacity(rows * cols);
                for _ in 0..rows {
                    data.extend(read_row(next()?, cols)?);
                }
                let m = Matrix::from_vec(rows, cols, data);
                if which == "self" {
                    model.layers[l].w_self = m;
                } else {
                    model.layers[l].w_nbr = m;
                }
            }
        }
        expect_section(next()?, "score ")?;
        model.score = read_row(next()?, 2 * model.output_dim())?;
        Ok(model)
    }
}
