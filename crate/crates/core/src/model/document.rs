//! JSON model file schema and its conversion to and from [`PosmdpModel`].

use serde::{Deserialize, Serialize};

use super::{
    KernelSource, MixedObservable, ModelError, ObservationSource, PosmdpModel, BIN_EDGE_CLAMP,
    MODEL_FORMAT_VERSION,
};
use crate::distributions::{BetaDensity, SojournDistribution};
use crate::format::to_json_string;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub version: u32,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admissible: Option<Vec<Vec<String>>>,
    pub observations: ObservationsDocument,
    /// `[s][a][s']`
    pub transition: Vec<Vec<Vec<f64>>>,
    pub sojourn: Vec<SojournRecord>,
    pub observation_kernel: KernelDocument,
    /// `[s'][o]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g0: Option<Vec<Vec<f64>>>,
    /// `[s][a]`
    pub r1: Vec<Vec<f64>>,
    /// `[s][a][s']`
    pub r2: Vec<Vec<Vec<f64>>>,
    pub beta: f64,
    pub initial_belief: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixed_observable: Option<MixedObservable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservationsDocument {
    Names(Vec<String>),
    Bins(BinsDocument),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinsDocument {
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelDocument {
    /// `[a][s'][o]`
    Dense(Vec<Vec<Vec<f64>>>),
    Beta(BetaKernelDocument),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaKernelDocument {
    pub beta: Vec<BetaKernelRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaKernelRow {
    pub a: usize,
    pub phi: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SojournRecord {
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
    pub dist: SojournDistribution,
}

fn check_len(path: impl Into<String>, expected: usize, found: usize) -> Result<(), ModelError> {
    if expected == found {
        Ok(())
    } else {
        Err(ModelError::Shape {
            path: path.into(),
            expected,
            found,
        })
    }
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

/// Evenly spaced points on `[0, 1]`, clamped away from the endpoints.
pub(crate) fn bin_points(bins: usize) -> Vec<f64> {
    (0..bins)
        .map(|k| (k as f64 / (bins - 1) as f64).clamp(BIN_EDGE_CLAMP, 1.0 - BIN_EDGE_CLAMP))
        .collect()
}

fn flatten3(path: &str, rows: &[Vec<Vec<f64>>], d0: usize, d1: usize, d2: usize) -> Result<Vec<f64>, ModelError> {
    check_len(path, d0, rows.len())?;
    let mut out = Vec::with_capacity(d0 * d1 * d2);
    for (i, mid) in rows.iter().enumerate() {
        check_len(format!("{path}[{i}]"), d1, mid.len())?;
        for (j, inner) in mid.iter().enumerate() {
            check_len(format!("{path}[{i}][{j}]"), d2, inner.len())?;
            out.extend_from_slice(inner);
        }
    }
    Ok(out)
}

fn flatten2(path: &str, rows: &[Vec<f64>], d0: usize, d1: usize) -> Result<Vec<f64>, ModelError> {
    check_len(path, d0, rows.len())?;
    let mut out = Vec::with_capacity(d0 * d1);
    for (i, inner) in rows.iter().enumerate() {
        check_len(format!("{path}[{i}]"), d1, inner.len())?;
        out.extend_from_slice(inner);
    }
    Ok(out)
}

fn unflatten3(flat: &[f64], d1: usize, d2: usize) -> Vec<Vec<Vec<f64>>> {
    flat.chunks(d1 * d2)
        .map(|mid| mid.chunks(d2).map(<[f64]>::to_vec).collect())
        .collect()
}

fn unflatten2(flat: &[f64], d1: usize) -> Vec<Vec<f64>> {
    flat.chunks(d1).map(<[f64]>::to_vec).collect()
}

impl PosmdpModel {
    /// Builds a model from a parsed document. Shape and reference errors are
    /// reported here; semantic checks are left to [`PosmdpModel::validate`].
    pub fn from_document(doc: ModelDocument) -> Result<Self, ModelError> {
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Version {
                found: doc.version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let ns = doc.states.len();
        let na = doc.actions.len();
        if ns == 0 {
            return Err(invalid("states", "at least one state is required"));
        }
        if na == 0 {
            return Err(invalid("actions", "at least one action is required"));
        }

        let (observations, observation_source) = match &doc.observations {
            ObservationsDocument::Names(names) => (names.clone(), ObservationSource::Named),
            ObservationsDocument::Bins(b) => {
                if b.bins < 2 {
                    return Err(invalid("observations.bins", "at least 2 bins are required"));
                }
                let names = bin_points(b.bins).iter().map(|p| format!("{p:.6}")).collect();
                (names, ObservationSource::Bins(b.bins))
            }
        };
        let no = observations.len();
        if no == 0 {
            return Err(invalid("observations", "at least one observation is required"));
        }

        let (admissible, admissible_declared) = match &doc.admissible {
            None => (vec![(0..na).collect::<Vec<_>>(); ns], false),
            Some(rows) => {
                check_len("admissible", ns, rows.len())?;
                let mut out = Vec::with_capacity(ns);
                for (s, names) in rows.iter().enumerate() {
                    let mut idx = Vec::with_capacity(names.len());
                    for name in names {
                        let a = doc
                            .actions
                            .iter()
                            .position(|x| x == name)
                            .ok_or_else(|| invalid(format!("admissible[{s}]"), format!("unknown action `{name}`")))?;
                        idx.push(a);
                    }
                    idx.sort_unstable();
                    idx.dedup();
                    out.push(idx);
                }
                (out, true)
            }
        };

        let transition = flatten3("transition", &doc.transition, ns, na, ns)?;

        let mut sojourn = vec![None; ns * na * ns];
        for (i, rec) in doc.sojourn.iter().enumerate() {
            let path = format!("sojourn[{i}]");
            if rec.s >= ns || rec.s_next >= ns || rec.a >= na {
                return Err(invalid(path, "state or action index out of range"));
            }
            rec.dist
                .validate()
                .map_err(|source| ModelError::Distribution { path: path.clone(), source })?;
            let slot = &mut sojourn[(rec.s * na + rec.a) * ns + rec.s_next];
            if slot.is_some() {
                return Err(invalid(path, "duplicate entry for this transition"));
            }
            *slot = Some(rec.dist);
        }

        let (observation_kernel, kernel_source) = match &doc.observation_kernel {
            KernelDocument::Dense(rows) => (flatten3("observation_kernel", rows, na, ns, no)?, KernelSource::Dense),
            KernelDocument::Beta(beta) => {
                let ObservationSource::Bins(bins) = observation_source else {
                    return Err(invalid(
                        "observation_kernel.beta",
                        "beta kernels require `observations` declared as bins",
                    ));
                };
                let points = bin_points(bins);
                let mut kernel = vec![f64::NAN; na * ns * no];
                let mut rows = Vec::with_capacity(beta.beta.len());
                for (i, row) in beta.beta.iter().enumerate() {
                    let path = format!("observation_kernel.beta[{i}]");
                    if row.a >= na {
                        return Err(invalid(path, "action index out of range"));
                    }
                    let density = BetaDensity::new(row.phi, row.eta)
                        .map_err(|source| ModelError::Distribution { path: path.clone(), source })?;
                    let weights: Vec<f64> = points
                        .iter()
                        .map(|&p| density.pdf(p).expect("bin points lie inside (0, 1)"))
                        .collect();
                    let total: f64 = weights.iter().sum();
                    if !(total > 0.0 && total.is_finite()) {
                        return Err(invalid(path, "beta density vanishes on every bin"));
                    }
                    for s_next in 0..ns {
                        let start = (row.a * ns + s_next) * no;
                        for (o, w) in weights.iter().enumerate() {
                            kernel[start + o] = w / total;
                        }
                    }
                    rows.push((row.a, density));
                }
                if let Some(a) = (0..na).find(|a| kernel[a * ns * no].is_nan()) {
                    return Err(invalid("observation_kernel.beta", format!("no row for action {a}")));
                }
                (kernel, KernelSource::Beta(rows))
            }
        };

        let initial_observation_kernel = doc
            .g0
            .as_ref()
            .map(|rows| flatten2("g0", rows, ns, no))
            .transpose()?;
        let lump_reward = flatten2("r1", &doc.r1, ns, na)?;
        let rate_reward = flatten3("r2", &doc.r2, ns, na, ns)?;
        check_len("initial_belief", ns, doc.initial_belief.len())?;

        if let Some(mo) = &doc.mixed_observable {
            if mo.observable.len() * mo.hidden.len() != ns {
                return Err(invalid(
                    "mixed_observable",
                    format!(
                        "{} observable x {} hidden values do not cover {ns} states",
                        mo.observable.len(),
                        mo.hidden.len()
                    ),
                ));
            }
        }

        let mut model = PosmdpModel {
            states: doc.states,
            actions: doc.actions,
            observations,
            observation_source,
            admissible,
            admissible_declared,
            transition,
            sojourn,
            observation_kernel,
            kernel_source,
            initial_observation_kernel,
            lump_reward,
            rate_reward,
            beta: doc.beta,
            initial_belief: doc.initial_belief,
            mixed_observable: doc.mixed_observable,
            initial_value: doc.initial_value,
            atom_times: Vec::new(),
        };
        model.rebuild_atom_index();
        Ok(model)
    }

    pub fn to_document(&self) -> ModelDocument {
        let (ns, na, no) = (self.num_states(), self.num_actions(), self.num_observations());
        let admissible = self.admissible_declared.then(|| {
            self.admissible
                .iter()
                .map(|row| row.iter().map(|&a| self.actions[a].clone()).collect())
                .collect()
        });
        let observations = match self.observation_source {
            ObservationSource::Named => ObservationsDocument::Names(self.observations.clone()),
            ObservationSource::Bins(bins) => ObservationsDocument::Bins(BinsDocument { bins }),
        };
        let observation_kernel = match &self.kernel_source {
            KernelSource::Dense => KernelDocument::Dense(unflatten3(&self.observation_kernel, ns, no)),
            KernelSource::Beta(rows) => KernelDocument::Beta(BetaKernelDocument {
                beta: rows
                    .iter()
                    .map(|(a, d)| BetaKernelRow {
                        a: *a,
                        phi: d.phi,
                        eta: d.eta,
                    })
                    .collect(),
            }),
        };
        let mut sojourn = Vec::new();
        for s in 0..ns {
            for a in 0..na {
                for s_next in 0..ns {
                    if let Some(dist) = self.sojourn(s, a, s_next) {
                        sojourn.push(SojournRecord {
                            s,
                            a,
                            s_next,
                            dist: *dist,
                        });
                    }
                }
            }
        }
        ModelDocument {
            version: MODEL_FORMAT_VERSION,
            states: self.states.clone(),
            actions: self.actions.clone(),
            admissible,
            observations,
            transition: unflatten3(&self.transition, na, ns),
            sojourn,
            observation_kernel,
            g0: self.initial_observation_kernel.as_ref().map(|k| unflatten2(k, no)),
            r1: unflatten2(&self.lump_reward, na),
            r2: unflatten3(&self.rate_reward, na, ns),
            beta: self.beta,
            initial_belief: self.initial_belief.clone(),
            mixed_observable: self.mixed_observable.clone(),
            initial_value: self.initial_value,
        }
    }

    /// Canonical model file text.
    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        to_json_string(&self.to_document())
    }
}
