use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::energy::EnergyMeasure;
use crate::error::{HkeError, Result};
use crate::space::SweepMode;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ConditionTag {
    Pi,
    Cap,
    Ce,
    Cs,
    T1,
    T2,
    Balance,
    Hke,
    Walk,
    Morrey,
    Sp,
    Doubling,
    Holder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// A lower bound from a finite test suite rather than an exact supremum.
    Fitted,
    Inapplicable,
}

/// Ball(s) and test function attaining a reported supremum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Witness {
    /// `(center, radius)` pairs.
    pub balls: Vec<(usize, f64)>,
    pub function: Option<String>,
    pub vertex: Option<usize>,
    pub time: Option<f64>,
}

impl Witness {
    pub fn ball(center: usize, radius: f64) -> Self {
        Self {
            balls: vec![(center, radius)],
            ..Self::default()
        }
    }

    pub fn with_function(mut self, f: impl Into<String>) -> Self {
        self.function = Some(f.into());
        self
    }
}

/// One raw sweep sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub y: usize,
    pub r: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub tag: ConditionTag,
    pub constants: BTreeMap<String, f64>,
    pub worst_witness: Option<Witness>,
    pub residual: Option<f64>,
    pub verdict: Verdict,
    pub mode: Option<SweepMode>,
    pub flags: Vec<String>,
    /// Raw samples, exported as CSV rather than inlined in the JSON.
    #[serde(skip)]
    pub rows: Vec<SweepRow>,
}

impl ConditionReport {
    pub fn new(tag: ConditionTag) -> Self {
        Self {
            tag,
            constants: BTreeMap::new(),
            worst_witness: None,
            residual: None,
            verdict: Verdict::Pass,
            mode: None,
            flags: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn set(&mut self, name: &str, value: f64) -> &mut Self {
        self.constants.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.constants.get(name).copied()
    }

    pub fn flag(&mut self, msg: impl Into<String>) {
        let m = msg.into();
        if !self.flags.contains(&m) {
            self.flags.push(m);
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "y,r,lhs,rhs,ratio")?;
        for r in &self.rows {
            writeln!(w, "{},{:e},{:e},{:e},{:e}", r.y, r.r, r.lhs, r.rhs, r.ratio)?;
        }
        Ok(())
    }
}

/// Running maximum with the deterministic tie-break: lowest vertex, then
/// smallest radius.
#[derive(Debug, Clone)]
pub(crate) struct Argmax {
    pub value: f64,
    pub key: Option<(usize, f64)>,
    pub extra: Option<String>,
}

impl Argmax {
    pub fn new() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            key: None,
            extra: None,
        }
    }

    pub fn offer(&mut self, value: f64, x: usize, r: f64, extra: Option<&str>) {
        let better = match self.key {
            None => !value.is_nan(),
            Some((bx, br)) => value > self.value || (value == self.value && (x, r) < (bx, br)),
        };
        if better {
            self.value = value;
            self.key = Some((x, r));
            self.extra = extra.map(str::to_string);
        }
    }

    pub fn witness(&self) -> Option<Witness> {
        self.key.map(|(x, r)| Witness {
            balls: vec![(x, r)],
            function: self.extra.clone(),
            ..Witness::default()
        })
    }
}

/// Nonnegative vertex weights: absolutely continuous measures, energy
/// measures, Dirac masses and the zero measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorelMeasure<T> {
    pub weights: Vec<T>,
}

impl<T: Scalar> BorelMeasure<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(HkeError::InvalidParameter(format!("measure weight at {i} is not a finite nonnegative number")));
        }
        Ok(Self { weights })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            weights: vec![T::zero(); n],
        }
    }

    pub fn dirac(n: usize, x: usize) -> Result<Self> {
        if x >= n {
            return Err(HkeError::VertexOutOfRange(x));
        }
        let mut weights = vec![T::zero(); n];
        weights[x] = T::one();
        Ok(Self { weights })
    }

    pub fn from_energy(m: &EnergyMeasure<T>) -> Self {
        Self {
            weights: m.weights.iter().map(|w| w.max(T::zero())).collect(),
        }
    }

    pub fn scaled(&self, a: T) -> Self {
        Self {
            weights: self.weights.iter().map(|&w| w * a).collect(),
        }
    }

    pub fn mass(&self, set: &[usize]) -> T {
        set.iter().map(|&v| self.weights[v]).sum()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&v| self.weights[v] > T::zero()).collect()
    }
}
