use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::eval::{evaluate_set, truth_indices, Evaluation};
use super::stats::{mean, paired_ttest, std_dev};
use super::train::{train, EpochRecord, Network, Predictor, TaskFbcsp, TrainConfig};
use crate::dataset::{split, EpochSet, TaskId, TaskSpec};
use crate::era::{EraConfig, EraModel, FlatModel};
use crate::error::{Error, Result};
use crate::fbcsp::{FbcspConfig, FbcspModel};
use crate::tensor::{Precision, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Era,
    Flat,
    Fbcsp,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Era, Method::Flat, Method::Fbcsp];

    pub fn name(self) -> &'static str {
        match self {
            Self::Era => "era",
            Self::Flat => "flat",
            Self::Fbcsp => "fbcsp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "era" | "era-cnn" => Ok(Self::Era),
            "flat" => Ok(Self::Flat),
            "fbcsp" => Ok(Self::Fbcsp),
            _ => Err(Error::Config(format!("unknown method {s:?} (expected era, flat or fbcsp)"))),
        }
    }
}

/// Per-method model settings.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct MethodConfig {
    /// Network layout; `None` derives the default layout from the task.
    pub era: Option<EraConfig>,
    pub fbcsp: FbcspConfig,
}

impl MethodConfig {
    pub fn era_config(&self, task: &TaskSpec) -> EraConfig {
        let mut cfg = self.era.clone().unwrap_or_default();
        cfg.arm_classes = task.m();
        cfg
    }
}

pub struct Fitted {
    pub model: Box<dyn Predictor>,
    pub history: Vec<EpochRecord>,
}

fn fit_network<T, N>(
    mut net: N,
    set: &EpochSet,
    cfg: &TrainConfig,
    hook: &mut dyn FnMut(&EpochRecord, &dyn Predictor) -> Result<()>,
) -> Result<Fitted>
where
    T: Real,
    N: Network<T> + Predictor + 'static,
{
    let history = train(&mut net, set, cfg, |rec, n| hook(rec, n))?;
    Ok(Fitted {
        model: Box::new(net),
        history,
    })
}

fn fit_typed<T: Real>(
    method: Method,
    set: &EpochSet,
    task: &TaskSpec,
    train_cfg: &TrainConfig,
    methods: &MethodConfig,
    hook: &mut dyn FnMut(&EpochRecord, &dyn Predictor) -> Result<()>,
) -> Result<Fitted> {
    let era = methods.era_config(task);
    match method {
        Method::Era => fit_network(EraModel::<T>::new(era, task.clone(), train_cfg.seed)?, set, train_cfg, hook),
        Method::Flat => fit_network(FlatModel::<T>::new(era, task.clone(), train_cfg.seed)?, set, train_cfg, hook),
        Method::Fbcsp => unreachable!("handled by fit_method"),
    }
}

/// Trains one method on `set`. `hook` runs after each network epoch.
pub fn fit_method(
    method: Method,
    set: &EpochSet,
    task: &TaskSpec,
    train_cfg: &TrainConfig,
    methods: &MethodConfig,
    hook: &mut dyn FnMut(&EpochRecord, &dyn Predictor) -> Result<()>,
) -> Result<Fitted> {
    if set.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    match (method, train_cfg.precision) {
        (Method::Fbcsp, _) => {
            set.check_task(task)?;
            let labels = truth_indices(set, task)?;
            let model = FbcspModel::fit(&set.epochs, &labels, set.sampling_rate, methods.fbcsp.clone())?;
            Ok(Fitted {
                model: Box::new(TaskFbcsp {
                    task: task.clone(),
                    model,
                }),
                history: Vec::new(),
            })
        }
        (_, Precision::F32) => fit_typed::<f32>(method, set, task, train_cfg, methods, hook),
        (_, Precision::F64) => fit_typed::<f64>(method, set, task, train_cfg, methods, hook),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub task: TaskSpec,
    pub methods: Vec<Method>,
    pub train: TrainConfig,
    pub models: MethodConfig,
    pub test_fraction: f64,
    /// Seed of the train/test split.
    pub split_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectRow {
    pub subject: String,
    /// One accuracy per method, in `EvalReport::methods` order.
    pub accuracies: Vec<f64>,
    pub confusion: Vec<Vec<Vec<usize>>>,
    pub train_hash: String,
    pub test_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub a: String,
    pub b: String,
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: TaskId,
    pub methods: Vec<String>,
    pub rows: Vec<SubjectRow>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub ttests: Vec<PairedComparison>,
    pub note: Option<String>,
}

impl EvalReport {
    pub fn from_rows(task: TaskId, methods: Vec<String>, rows: Vec<SubjectRow>) -> Self {
        let column = |j: usize| -> Vec<f64> { rows.iter().map(|r| r.accuracies[j]).collect() };
        let mean_row = (0..methods.len()).map(|j| mean(&column(j))).collect();
        let std_row = (0..methods.len()).map(|j| std_dev(&column(j))).collect();
        let mut ttests = Vec::new();
        let note = if rows.len() < 2 {
            Some(format!("{} subject(s): too few for paired t-tests", rows.len()))
        } else {
            for i in 0..methods.len() {
                for j in i + 1..methods.len() {
                    let (t, p, note) = match paired_ttest(&column(i), &column(j)) {
                        Ok(r) => (Some(r.t), Some(r.p), None),
                        Err(e) => (None, None, Some(e.to_string())),
                    };
                    ttests.push(PairedComparison {
                        a: methods[i].clone(),
                        b: methods[j].clone(),
                        t,
                        p,
                        note,
                    });
                }
            }
            None
        };
        Self {
            task,
            methods,
            rows,
            mean: mean_row,
            std: std_row,
            ttests,
            note,
        }
    }

    pub fn accuracy_csv(&self) -> String {
        let mut out = format!("subject,{},train_hash,test_hash\n", self.methods.join(","));
        let fmt_row = |v: &[f64]| v.iter().map(|a| format!("{a:.6}")).collect::<Vec<_>>().join(",");
        for r in &self.rows {
            out += &format!("{},{},{},{}\n", r.subject, fmt_row(&r.accuracies), r.train_hash, r.test_hash);
        }
        out += &format!("mean,{},,\n", fmt_row(&self.mean));
        out += &format!("std,{},,\n", fmt_row(&self.std));
        out
    }

    pub fn ttest_csv(&self) -> String {
        let mut out = String::from("method_a,method_b,t,p,note\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for c in &self.ttests {
            out += &format!(
                "{},{},{},{},{}\n",
                c.a,
                c.b,
                opt(c.t),
                opt(c.p),
                c.note.clone().unwrap_or_default().replace(',', ";")
            );
        }
        out
    }

    /// Writes `report.csv`, `ttests.csv` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Data(e.to_string()))?;
        let files = [
            ("report.csv", self.accuracy_csv()),
            ("ttests.csv", self.ttest_csv()),
            ("report.json", json + "\n"),
        ];
        files
            .into_iter()
            .map(|(name, body)| {
                let path = dir.join(name);
                fs::write(&path, body).map_err(|source| Error::Io {
                    path: path.clone(),
                    source,
                })?;
                Ok(path)
            })
            .collect()
    }
}

/// Splits every subject once and evaluates each method on the identical split.
pub fn run_experiment(spec: &ExperimentSpec, subjects: &[EpochSet]) -> Result<EvalReport> {
    if subjects.is_empty() {
        return Err(Error::Data("no subject data supplied".into()));
    }
    if spec.methods.is_empty() {
        return Err(Error::Config("no methods requested".into()));
    }
    let mut rows = Vec::with_capacity(subjects.len());
    for set in subjects {
        let data = set.restrict(&spec.task)?;
        let (train_set, test_set) = split(&data, spec.test_fraction, spec.split_seed)?;
        let train_hash = train_set.content_hash();
        let test_hash = test_set.content_hash();
        let mut accuracies = Vec::new();
        let mut confusion = Vec::new();
        for &m in &spec.methods {
            debug_assert_eq!(train_set.content_hash(), train_hash);
            let fitted = fit_method(m, &train_set, &spec.task, &spec.train, &spec.models, &mut |_, _| Ok(()))?;
            let Evaluation { accuracy, confusion: c } = evaluate_set(fitted.model.as_ref(), &test_set, &spec.task)?;
            accuracies.push(accuracy);
            confusion.push(c);
        }
        rows.push(SubjectRow {
            subject: set.subject.clone(),
            accuracies,
            confusion,
            train_hash,
            test_hash,
        });
    }
    Ok(EvalReport::from_rows(
        spec.task.id,
        spec.methods.iter().map(|m| m.name().to_string()).collect(),
        rows,
    ))
}
