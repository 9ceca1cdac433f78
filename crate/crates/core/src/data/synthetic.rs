use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecaster::Task;
use crate::numkit::rng::streams;
use crate::numkit::{Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Linear,
    Cubic,
    Sines,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Linear, Family::Cubic, Family::Sines];

    pub fn name(self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::Cubic => "cubic",
            Family::Sines => "sines",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Family::Linear),
            "cubic" => Ok(Family::Cubic),
            "sines" => Ok(Family::Sines),
            other => Err(Error::InvalidConfig(format!(
                "unknown synthetic family {other:?}; expected linear, cubic or sines"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub family: Family,
    pub n_train_tasks: usize,
    pub n_test_tasks: usize,
    pub points: usize,
    pub lookback: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            family: Family::Linear,
            n_train_tasks: 1000,
            n_test_tasks: 100,
            points: 400,
            lookback: 200,
            horizon: 200,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn new(family: Family, seed: u64) -> Self {
        Self {
            family,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lookback == 0 || self.horizon == 0 {
            return Err(Error::InvalidConfig("synthetic lookback and horizon must be >= 1".into()));
        }
        if self.points != self.lookback + self.horizon {
            return Err(Error::InvalidConfig(format!(
                "synthetic points ({}) must equal lookback + horizon ({})",
                self.points,
                self.lookback + self.horizon
            )));
        }
        if self.n_train_tasks == 0 || self.n_test_tasks == 0 {
            return Err(Error::InvalidConfig("synthetic task counts must be >= 1".into()));
        }
        Ok(())
    }

    /// Sample grid: `[-1, 1]` for polynomials, `[0, 1]` for sines.
    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = match self.family {
            Family::Linear | Family::Cubic => (-1.0, 1.0),
            Family::Sines => (0.0, 1.0),
        };
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| if i + 1 == self.points { hi } else { lo + (hi - lo) * i as f64 / last })
            .collect()
    }
}

/// One sine component of a [`Family::Sines`] task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineTerm {
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TaskParams {
    /// `y = a x + b`
    Linear { a: f64, b: f64 },
    /// `y = a x^3 + b x^2 + c x + d`
    Cubic { a: f64, b: f64, c: f64, d: f64 },
    /// `y = sum_j A_j sin(w_j x + phi_j)`
    Sines { terms: Vec<SineTerm> },
}

impl TaskParams {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TaskParams::Linear { a, b } => a * x + b,
            TaskParams::Cubic { a, b, c, d } => ((a * x + b) * x + c) * x + d,
            TaskParams::Sines { terms } => terms
                .iter()
                .map(|t| t.amplitude * (t.frequency * x + t.phase).sin())
                .sum(),
        }
    }

    /// Bit-level key used to keep train and test parameters disjoint.
    pub fn key(&self) -> Vec<u64> {
        match self {
            TaskParams::Linear { a, b } => vec![a.to_bits(), b.to_bits()],
            TaskParams::Cubic { a, b, c, d } => vec![a.to_bits(), b.to_bits(), c.to_bits(), d.to_bits()],
            TaskParams::Sines { terms } => terms
                .iter()
                .flat_map(|t| [t.frequency.to_bits(), t.amplitude.to_bits(), t.phase.to_bits()])
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub params: TaskParams,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub spec: SyntheticSpec,
    pub train: Vec<SyntheticTask>,
    pub test: Vec<SyntheticTask>,
    /// The shared frequency set of the sines family.
    pub frequencies: Option<Vec<f64>>,
}

impl SyntheticData {
    pub fn train_tasks(&self) -> Vec<Task> {
        self.train.iter().map(|t| t.task.clone()).collect()
    }

    pub fn test_tasks(&self) -> Vec<Task> {
        self.test.iter().map(|t| t.task.clone()).collect()
    }
}

const SINE_SET_SIZE: usize = 5;
const MAX_SINE_TERMS: usize = 5;

/// The five frequencies shared by every sines task of a generator seed.
pub fn sine_frequencies(seed: u64) -> Vec<f64> {
    let mut rng = Rng::new(seed).fork(streams::DATA).fork(0);
    (0..SINE_SET_SIZE).map(|_| rng.uniform(0.0, 12.0 * PI)).collect()
}

fn sample(family: Family, freqs: &[f64], rng: &mut Rng) -> TaskParams {
    match family {
        Family::Linear => TaskParams::Linear {
            a: 50.0 * rng.normal(),
            b: 50.0 * rng.normal(),
        },
        Family::Cubic => TaskParams::Cubic {
            a: rng.uniform(-50.0, 50.0),
            b: rng.uniform(-50.0, 50.0),
            c: rng.uniform(-50.0, 50.0),
            d: rng.uniform(-50.0, 50.0),
        },
        Family::Sines => {
            let j = 1 + rng.below(MAX_SINE_TERMS);
            let terms = (0..j)
                .map(|_| SineTerm {
                    frequency: freqs[rng.below(freqs.len())],
                    amplitude: rng.uniform(0.1, 5.0),
                    phase: rng.uniform(0.0, PI),
                })
                .collect();
            TaskParams::Sines { terms }
        }
    }
}

fn build(spec: &SyntheticSpec, params: TaskParams, x: &[f64]) -> Result<SyntheticTask> {
    let y: Vec<f64> = x.iter().map(|&xi| params.eval(xi)).collect();
    let lookback = Matrix::column(&y[..spec.lookback]);
    let horizon = Matrix::column(&y[spec.lookback..]);
    let task = Task::new(lookback, horizon, spec.lookback)?;
    Ok(SyntheticTask {
        params,
        x: x.to_vec(),
        y,
        task,
    })
}

/// Draws disjoint train and test task sets for `spec`.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let frequencies = (spec.family == Family::Sines).then(|| sine_frequencies(spec.seed));
    let freqs = frequencies.clone().unwrap_or_default();
    let mut rng = Rng::new(spec.seed).fork(streams::DATA).fork(1);
    let x = spec.grid();
    let mut seen = HashSet::new();
    let mut draw = |n: usize, rng: &mut Rng| -> Result<Vec<SyntheticTask>> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let p = sample(spec.family, &freqs, rng);
            if seen.insert(p.key()) {
                out.push(build(spec, p, &x)?);
            }
        }
        Ok(out)
    };
    let train = draw(spec.n_train_tasks, &mut rng)?;
    let test = draw(spec.n_test_tasks, &mut rng)?;
    Ok(SyntheticData {
        spec: spec.clone(),
        train,
        test,
        frequencies,
    })
}

/// Writes one `x,y` CSV per task into `dir` as `{prefix}_{index:05}.csv`.
pub fn dump_tasks(dir: &Path, prefix: &str, tasks: &[SyntheticTask]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, t) in tasks.iter().enumerate() {
        let path = dir.join(format!("{prefix}_{i:05}.csv"));
        let mut s = String::from("x,y\n");
        for (x, y) in t.x.iter().zip(&t.y) {
            writeln!(s, "{x},{y}").expect("writing to a string");
        }
        std::fs::write(&path, s).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(family: Family, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n_train_tasks: 50,
            n_test_tasks: 10,
            ..SyntheticSpec::new(family, seed)
        }
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let g = SyntheticSpec::default().grid();
        assert_eq!(g.len(), 400);
        assert_eq!((g[0], g[399]), (-1.0, 1.0));
        let s = SyntheticSpec::new(Family::Sines, 0).grid();
        assert_eq!((s[0], s[399]), (0.0, 1.0));
    }

    #[test]
    fn linear_tasks_follow_their_parameters() {
        let data = gen_synthetic(&small(Family::Linear, 3)).unwrap();
        for t in data.train.iter().chain(&data.test) {
            let TaskParams::Linear { a, b } = t.params else { panic!() };
            for (x, y) in t.x.iter().zip(&t.y) {
                assert_eq!(*y, a * x + b);
            }
            assert_eq!(t.task.lookback_len(), 200);
            assert_eq!(t.task.horizon_len(), 200);
        }
    }

    #[test]
    fn sines_use_shared_frequency_set() {
        let data = gen_synthetic(&small(Family::Sines, 9)).unwrap();
        let freqs = data.frequencies.clone().unwrap();
        assert_eq!(freqs.len(), 5);
        assert!(freqs.iter().all(|f| (0.0..12.0 * PI).contains(f)));
        for t in &data.train {
            let TaskParams::Sines { terms } = &t.params else { panic!() };
            assert!((1..=5).contains(&terms.len()));
            for term in terms {
                assert!(freqs.contains(&term.frequency));
                assert!((0.1..5.0).contains(&term.amplitude));
                assert!((0.0..PI).contains(&term.phase));
            }
        }
    }

    #[test]
    fn train_and_test_parameters_disjoint() {
        for family in Family::ALL {
            for seed in 0..5 {
                let data = gen_synthetic(&small(family, seed)).unwrap();
                let train: HashSet<_> = data.train.iter().map(|t| t.params.key()).collect();
                assert!(data.test.iter().all(|t| !train.contains(&t.params.key())));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_synthetic(&small(Family::Cubic, 4)).unwrap();
        let b = gen_synthetic(&small(Family::Cubic, 4)).unwrap();
        assert_eq!(a, b);
        let c = gen_synthetic(&small(Family::Cubic, 5)).unwrap();
        assert_ne!(a.train[0].params, c.train[0].params);
    }

    #[test]
    fn spec_rejects_inconsistent_points() {
        let spec = SyntheticSpec {
            points: 300,
            ..Default::default()
        };
        assert!(gen_synthetic(&spec).is_err());
    }

    #[test]
    fn dump_writes_one_file_per_task() {
        let dir = tempfile::tempdir().unwrap();
        let data = gen_synthetic(&small(Family::Linear, 1)).unwrap();
        dump_tasks(dir.path(), "test", &data.test).unwrap();
        let text = std::fs::read_to_string(dir.path().join("test_00000.csv")).unwrap();
        assert!(text.starts_with("x,y\n-1,"));
        assert_eq!(text.lines().count(), 401);
    }
}
