//! Named parameter arrays with paired gradient accumulators and Adam state.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Adam constants. The step sizes are configured per agent; these are the
/// usual defaults for the moment estimates.
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Index of a parameter entry inside a [`ParamStore`].
///
/// Ids are positional, so a structural clone of a store (e.g. a target copy)
/// resolves the same ids to the same entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

#[derive(Clone, Debug)]
struct Entry {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    grad: Vec<f64>,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
}

/// Flat collection of learnable arrays shared by the Q network and the
/// argmax predictors, with same-shaped gradient accumulators and per-entry
/// Adam moments.
#[derive(Clone, Debug)]
pub struct ParamStore {
    entries: Vec<Entry>,
    by_name: HashMap<String, usize>,
    step: u64,
    version: u64,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore {
            entries: Vec::new(),
            by_name: HashMap::new(),
            step: 0,
            version: 0,
        }
    }

    /// Registers a parameter array. Names must be unique.
    pub fn insert(&mut self, name: &str, rows: usize, cols: usize, data: Vec<f64>) -> ParamId {
        assert_eq!(data.len(), rows * cols, "param data length != rows*cols");
        assert!(
            !self.by_name.contains_key(name),
            "duplicate parameter name '{name}'"
        );
        let n = data.len();
        let idx = self.entries.len();
        self.entries.push(Entry {
            name: name.to_string(),
            rows,
            cols,
            data,
            grad: vec![0.0; n],
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
        });
        self.by_name.insert(name.to_string(), idx);
        ParamId(idx)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn shape(&self, id: ParamId) -> (usize, usize) {
        let e = &self.entries[id.0];
        (e.rows, e.cols)
    }

    pub fn data(&self, id: ParamId) -> &[f64] {
        &self.entries[id.0].data
    }

    /// Direct parameter mutation (tests, hand-set weights). Bumps the version
    /// so tapes recorded before the edit are rejected by `backward`.
    pub fn data_mut(&mut self, id: ParamId) -> &mut [f64] {
        self.version += 1;
        &mut self.entries[id.0].data
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.entries[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.entries[id.0].grad
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn param_count(&self) -> usize {
        self.entries.iter().map(|e| e.data.len()).sum()
    }

    /// Adam step counter: incremented exactly once per optimizer application.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// Mutation counter used for stale-tape detection.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(0.0);
        }
    }

    /// L2 norm of the gradient accumulators of entries whose name starts with
    /// `prefix` (empty prefix = whole store).
    pub fn grad_norm(&self, prefix: &str) -> f64 {
        let mut acc = 0.0;
        for e in &self.entries {
            if e.name.starts_with(prefix) {
                for &g in &e.grad {
                    acc += g * g;
                }
            }
        }
        acc.sqrt()
    }

    /// Scales accumulated gradients of entries under `prefix` by `factor`.
    pub fn scale_grads(&mut self, prefix: &str, factor: f64) {
        for e in &mut self.entries {
            if e.name.starts_with(prefix) {
                for g in &mut e.grad {
                    *g *= factor;
                }
            }
        }
    }

    /// One Adam application over the whole store.
    pub fn adam_step(&mut self, lr: f64) -> Result<()> {
        self.adam_step_groups(&[("", lr)])
    }

    /// One Adam application with per-group step sizes selected by name prefix
    /// (first matching prefix wins; entries matching no prefix are skipped).
    ///
    /// Adam is element-wise, so grouping only routes step sizes. The step
    /// counter advances once per application. If any gradient is non-finite
    /// the update is aborted before touching parameters, gradients are
    /// cleared, and the offending entry is reported.
    pub fn adam_step_groups(&mut self, groups: &[(&str, f64)]) -> Result<()> {
        for e in &self.entries {
            if e.grad.iter().any(|g| !g.is_finite()) {
                let name = e.name.clone();
                self.zero_grads();
                return Err(Error::NonFiniteGradient(name));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - ADAM_BETA1.powi(t);
        let bc2 = 1.0 - ADAM_BETA2.powi(t);
        for e in &mut self.entries {
            let Some(&(_, lr)) = groups.iter().find(|(p, _)| e.name.starts_with(p)) else {
                continue;
            };
            for i in 0..e.data.len() {
                let g = e.grad[i];
                e.adam_m[i] = ADAM_BETA1 * e.adam_m[i] + (1.0 - ADAM_BETA1) * g;
                e.adam_v[i] = ADAM_BETA2 * e.adam_v[i] + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = e.adam_m[i] / bc1;
                let v_hat = e.adam_v[i] / bc2;
                e.data[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
            e.grad.fill(0.0);
        }
        // Entries outside every group keep their gradients cleared as well:
        // one application consumes the accumulators.
        self.zero_grads();
        self.version += 1;
        Ok(())
    }

    /// Copies parameter data from a structurally identical store (target
    /// network sync). Adam state and gradients are not copied.
    pub fn copy_data_from(&mut self, other: &ParamStore) {
        assert_eq!(
            self.entries.len(),
            other.entries.len(),
            "copy_data_from: store layouts differ"
        );
        for (dst, src) in self.entries.iter_mut().zip(&other.entries) {
            assert_eq!(dst.name, src.name, "copy_data_from: entry names differ");
            dst.data.copy_from_slice(&src.data);
        }
        self.version += 1;
    }

    /// Snapshot of every entry for checkpointing:
    /// `(name, rows, cols, data, adam_m, adam_v)`.
    pub fn export_entries(&self) -> Vec<(String, usize, usize, &[f64], &[f64], &[f64])> {
        self.entries
            .iter()
            .map(|e| {
                (
                    e.name.clone(),
                    e.rows,
                    e.cols,
                    e.data.as_slice(),
                    e.adam_m.as_slice(),
                    e.adam_v.as_slice(),
                )
            })
            .collect()
    }

    /// Restores data and Adam state into an existing, structurally identical
    /// store. `step` replaces the Adam step counter.
    pub fn import_entries(
        &mut self,
        step: u64,
        entries: &[(String, usize, usize, Vec<f64>, Vec<f64>, Vec<f64>)],
    ) -> Result<()> {
        if entries.len() != self.entries.len() {
            return Err(Error::Checkpoint(format!(
                "store has {} entries, checkpoint has {}",
                self.entries.len(),
                entries.len()
            )));
        }
        for (dst, (name, rows, cols, data, m, v)) in self.entries.iter_mut().zip(entries) {
            if &dst.name != name || dst.rows != *rows || dst.cols != *cols {
                return Err(Error::Checkpoint(format!(
                    "entry mismatch: expected '{}' {}x{}, found '{}' {}x{}",
                    dst.name, dst.rows, dst.cols, name, rows, cols
                )));
            }
            dst.data.copy_from_slice(data);
            dst.adam_m.copy_from_slice(m);
            dst.adam_v.copy_from_slice(v);
        }
        self.step = step;
        self.version += 1;
        Ok(())
    }
}
