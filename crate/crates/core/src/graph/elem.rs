//! Elementary functions attached to internal vertices.
//!
//! Every function maps a list of input vectors to one output vector and
//! exposes its vector-Jacobian product per input slot. Element-wise kinds
//! require all inputs to share one dimension; there is no broadcasting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Tanh,
    Logistic,
}

impl Activation {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Linear => v,
            Activation::Tanh => v.tanh(),
            Activation::Logistic => 1.0 / (1.0 + (-v).exp()),
        }
    }

    pub fn derivative(self, v: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Tanh => {
                let t = v.tanh();
                1.0 - t * t
            }
            Activation::Logistic => {
                let s = self.apply(v);
                s * (1.0 - s)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Tanh => "tanh",
            Activation::Logistic => "logistic",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" | "identity" => Ok(Activation::Linear),
            "tanh" => Ok(Activation::Tanh),
            "logistic" | "sigmoid" => Ok(Activation::Logistic),
            other => Err(Error::BadSpec(format!("unknown activation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ElemFn {
    /// Fixed value, no inputs.
    Constant {
        value: Vec<f64>,
    },
    /// Element-wise sum of `arity` inputs.
    Add {
        arity: usize,
    },
    /// Element-wise product of `arity` inputs.
    Multiply {
        arity: usize,
    },
    /// Row-major `rows × cols` matrix (input 0) times a `cols` vector (input 1).
    #[serde(rename = "matvec")]
    MatVec {
        rows: usize,
        cols: usize,
    },
    Square,
    Sqrt,
    Activation {
        name: Activation,
    },
    /// Valid cross-correlation of a `kernel`-length filter (input 0) over an
    /// `input`-length signal (input 1), producing `input − kernel + 1` values.
    #[serde(rename = "conv1d")]
    Convolve1D {
        kernel: usize,
        input: usize,
    },
    Identity,
    /// Sum of all components, producing a scalar.
    SumReduce,
}

impl ElemFn {
    pub fn arity(&self) -> usize {
        match self {
            ElemFn::Constant { .. } => 0,
            ElemFn::Add { arity } | ElemFn::Multiply { arity } => *arity,
            ElemFn::MatVec { .. } | ElemFn::Convolve1D { .. } => 2,
            ElemFn::Square | ElemFn::Sqrt | ElemFn::Activation { .. } | ElemFn::Identity | ElemFn::SumReduce => 1,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ElemFn::Constant { .. } => "const".into(),
            ElemFn::Add { .. } => "add".into(),
            ElemFn::Multiply { .. } => "mul".into(),
            ElemFn::MatVec { rows, cols } => format!("matvec {rows}x{cols}"),
            ElemFn::Square => "square".into(),
            ElemFn::Sqrt => "sqrt".into(),
            ElemFn::Activation { name } => name.name().into(),
            ElemFn::Convolve1D { kernel, input } => format!("conv1d k{kernel} n{input}"),
            ElemFn::Identity => "id".into(),
            ElemFn::SumReduce => "sum".into(),
        }
    }

    /// Output dimension given the input dimensions, or a shape error.
    pub fn output_dim(&self, inputs: &[usize]) -> Result<usize> {
        if inputs.len() != self.arity() {
            return Err(Error::ShapeMismatch(format!(
                "{} expects {} inputs, got {}",
                self.label(),
                self.arity(),
                inputs.len()
            )));
        }
        let shape_err = |what: &str| Err(Error::ShapeMismatch(format!("{}: {what}", self.label())));
        match self {
            ElemFn::Constant { value } => {
                if value.is_empty() {
                    return shape_err("empty constant");
                }
                Ok(value.len())
            }
            ElemFn::Add { arity } | ElemFn::Multiply { arity } => {
                if *arity == 0 {
                    return shape_err("arity must be positive");
                }
                if inputs.iter().any(|&d| d != inputs[0]) {
                    return shape_err(&format!("inputs differ in dimension {inputs:?}"));
                }
                Ok(inputs[0])
            }
            ElemFn::MatVec { rows, cols } => {
                if *rows == 0 || *cols == 0 {
                    return shape_err("empty matrix");
                }
                if inputs[0] != rows * cols || inputs[1] != *cols {
                    return shape_err(&format!("got inputs {inputs:?}"));
                }
                Ok(*rows)
            }
            ElemFn::Convolve1D { kernel, input } => {
                if *kernel == 0 || kernel > input {
                    return shape_err("kernel must fit inside the input");
                }
                if inputs[0] != *kernel || inputs[1] != *input {
                    return shape_err(&format!("got inputs {inputs:?}"));
                }
                Ok(input - kernel + 1)
            }
            ElemFn::SumReduce => Ok(1),
            ElemFn::Square | ElemFn::Sqrt | ElemFn::Activation { .. } | ElemFn::Identity => Ok(inputs[0]),
        }
    }

    /// Applies the function. On a domain violation returns the offending
    /// input value; the caller attaches the vertex id.
    pub fn eval(&self, inputs: &[&[f64]]) -> std::result::Result<Vec<f64>, f64> {
        Ok(match self {
            ElemFn::Constant { value } => value.clone(),
            ElemFn::Add { .. } => {
                let mut out = inputs[0].to_vec();
                for inp in &inputs[1..] {
                    for (o, v) in out.iter_mut().zip(inp.iter()) {
                        *o += v;
                    }
                }
                out
            }
            ElemFn::Multiply { .. } => {
                let mut out = inputs[0].to_vec();
                for inp in &inputs[1..] {
                    for (o, v) in out.iter_mut().zip(inp.iter()) {
                        *o *= v;
                    }
                }
                out
            }
            ElemFn::MatVec { rows, cols } => {
                let (w, v) = (inputs[0], inputs[1]);
                (0..*rows)
                    .map(|r| {
                        let row = &w[r * cols..(r + 1) * cols];
                        row.iter().zip(v).map(|(a, b)| a * b).sum()
                    })
                    .collect()
            }
            ElemFn::Convolve1D { kernel, input } => {
                let (w, x) = (inputs[0], inputs[1]);
                (0..=(input - kernel)).map(|p| w.iter().zip(&x[p..p + kernel]).map(|(a, b)| a * b).sum()).collect()
            }
            ElemFn::Square => inputs[0].iter().map(|v| v * v).collect(),
            ElemFn::Sqrt => {
                if let Some(&bad) = inputs[0].iter().find(|v| v.is_nan() || **v < 0.0) {
                    return Err(bad);
                }
                inputs[0].iter().map(|v| v.sqrt()).collect()
            }
            ElemFn::Activation { name } => inputs[0].iter().map(|&v| name.apply(v)).collect(),
            ElemFn::Identity => inputs[0].to_vec(),
            ElemFn::SumReduce => vec![inputs[0].iter().sum()],
        })
    }

    /// Vector-Jacobian product `cotangentᵀ · ∂g/∂input[slot]`.
    pub fn vjp(&self, inputs: &[&[f64]], cotangent: &[f64], slot: usize) -> Vec<f64> {
        match self {
            ElemFn::Constant { .. } => unreachable!("constant has no inputs"),
            ElemFn::Add { .. } | ElemFn::Identity => cotangent.to_vec(),
            ElemFn::Multiply { .. } => (0..cotangent.len())
                .map(|k| {
                    let others: f64 =
                        inputs.iter().enumerate().filter(|(m, _)| *m != slot).map(|(_, inp)| inp[k]).product();
                    cotangent[k] * others
                })
                .collect(),
            ElemFn::MatVec { rows, cols } => {
                let (w, v) = (inputs[0], inputs[1]);
                if slot == 0 {
                    let mut g = Vec::with_capacity(rows * cols);
                    for &c in cotangent.iter().take(*rows) {
                        g.extend(v.iter().map(|x| c * x));
                    }
                    g
                } else {
                    (0..*cols).map(|c| (0..*rows).map(|r| cotangent[r] * w[r * cols + c]).sum()).collect()
                }
            }
            ElemFn::Convolve1D { kernel, input } => {
                let (w, x) = (inputs[0], inputs[1]);
                let positions = input - kernel + 1;
                if slot == 0 {
                    (0..*kernel).map(|m| (0..positions).map(|p| cotangent[p] * x[p + m]).sum()).collect()
                } else {
                    (0..*input)
                        .map(|q| {
                            (0..*kernel).filter(|&m| m <= q && q - m < positions).map(|m| cotangent[q - m] * w[m]).sum()
                        })
                        .collect()
                }
            }
            ElemFn::Square => inputs[0].iter().zip(cotangent).map(|(v, c)| c * 2.0 * v).collect(),
            ElemFn::Sqrt => inputs[0].iter().zip(cotangent).map(|(v, c)| c * 0.5 / v.sqrt()).collect(),
            ElemFn::Activation { name } => {
                inputs[0].iter().zip(cotangent).map(|(&v, c)| c * name.derivative(v)).collect()
            }
            ElemFn::SumReduce => vec![cotangent[0]; inputs[0].len()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central-difference Jacobian-transpose product, independent of `vjp`.
    fn numeric_vjp(f: &ElemFn, inputs: &[Vec<f64>], cot: &[f64], slot: usize) -> Vec<f64> {
        let h = 1e-6;
        (0..inputs[slot].len())
            .map(|k| {
                let eval_at = |delta: f64| {
                    let mut shifted = inputs.to_vec();
                    shifted[slot][k] += delta;
                    let refs: Vec<&[f64]> = shifted.iter().map(|v| v.as_slice()).collect();
                    let out = f.eval(&refs).unwrap();
                    out.iter().zip(cot).map(|(o, c)| o * c).sum::<f64>()
                };
                (eval_at(h) - eval_at(-h)) / (2.0 * h)
            })
            .collect()
    }

    fn check(f: ElemFn, inputs: Vec<Vec<f64>>) {
        let refs: Vec<&[f64]> = inputs.iter().map(|v| v.as_slice()).collect();
        let out = f.eval(&refs).unwrap();
        let cot: Vec<f64> = (0..out.len()).map(|k| 0.3 + 0.7 * k as f64).collect();
        for slot in 0..f.arity() {
            let analytic = f.vjp(&refs, &cot, slot);
            let numeric = numeric_vjp(&f, &inputs, &cot, slot);
            assert_eq!(analytic.len(), numeric.len());
            for (a, n) in analytic.iter().zip(&numeric) {
                assert!((a - n).abs() < 1e-7, "{f:?} slot {slot}: {a} vs {n}");
            }
        }
    }

    #[test]
    fn vjp_matches_finite_differences() {
        check(ElemFn::Add { arity: 3 }, vec![vec![1.0, 2.0], vec![0.5, -1.0], vec![3.0, 0.1]]);
        check(ElemFn::Multiply { arity: 3 }, vec![vec![1.0, 2.0], vec![0.5, -1.0], vec![3.0, 0.1]]);
        check(ElemFn::MatVec { rows: 2, cols: 3 }, vec![vec![0.1, -0.2, 0.3, 0.4, 0.5, -0.6], vec![1.0, 2.0, -1.5]]);
        check(ElemFn::Convolve1D { kernel: 2, input: 4 }, vec![vec![0.7, -0.3], vec![1.0, 2.0, -1.5, 0.25]]);
        check(ElemFn::Square, vec![vec![1.5, -0.5]]);
        check(ElemFn::Sqrt, vec![vec![1.5, 4.0]]);
        check(ElemFn::Activation { name: Activation::Tanh }, vec![vec![0.3, -1.2]]);
        check(ElemFn::Activation { name: Activation::Logistic }, vec![vec![0.3, -1.2]]);
        check(ElemFn::Identity, vec![vec![0.3, -1.2]]);
        check(ElemFn::SumReduce, vec![vec![0.3, -1.2, 5.0]]);
    }

    #[test]
    fn sqrt_rejects_negative_input() {
        assert_eq!(ElemFn::Sqrt.eval(&[&[-1.0]]), Err(-1.0));
    }

    #[test]
    fn identity_is_exact() {
        let v = [0.1 + 0.2, -7.0e-300];
        assert_eq!(ElemFn::Identity.eval(&[&v]).unwrap(), v.to_vec());
        assert_eq!(ElemFn::Identity.vjp(&[&v], &v, 0), v.to_vec());
    }

    #[test]
    fn conv_output_dim() {
        let f = ElemFn::Convolve1D { kernel: 3, input: 8 };
        assert_eq!(f.output_dim(&[3, 8]).unwrap(), 6);
        assert!(f.output_dim(&[2, 8]).is_err());
    }
}
