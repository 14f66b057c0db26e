use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numcore::{Array, Graph, Real, Var};

/// Named parameter arrays, keyed by dot-separated paths.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet<F> {
    map: BTreeMap<String, Array<F>>,
}

impl<F: Real> ParamSet<F> {
    pub fn new() -> Self {
        Self {
            map: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array<F>) {
        self.map.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Result<&Array<F>> {
        self.map
            .get(name)
            .ok_or_else(|| Error::config(format!("missing parameter `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Array<F>> {
        self.map
            .get_mut(name)
            .ok_or_else(|| Error::config(format!("missing parameter `{name}`")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Array<F>)> {
        self.map.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Total number of scalar values.
    pub fn count(&self) -> usize {
        self.map.values().map(Array::len).sum()
    }

    /// Records every parameter on `graph` as a trainable leaf.
    pub fn record<'g>(&self, graph: &'g Graph<F>) -> ParamVars<'g, F> {
        let vars = self
            .map
            .iter()
            .map(|(k, v)| (k.clone(), graph.param(k.clone(), v.clone())))
            .collect();
        ParamVars { graph, vars }
    }

    pub fn cast<G: Real>(&self) -> ParamSet<G> {
        ParamSet {
            map: self
                .map
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }
}

/// Parameters recorded on a graph, looked up by path during a forward pass.
pub struct ParamVars<'g, F: Real> {
    graph: &'g Graph<F>,
    vars: BTreeMap<String, Var<'g, F>>,
}

impl<'g, F: Real> ParamVars<'g, F> {
    /// The graph the parameters were recorded on.
    pub fn graph(&self) -> &'g Graph<F> {
        self.graph
    }

    pub fn get(&self, name: &str) -> Result<Var<'g, F>> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::config(format!("missing parameter `{name}`")))
    }
}
