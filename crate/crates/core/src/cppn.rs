//! Compositional pattern-producing network (CPPN) genotype.
//!
//! A genome is a feed-forward graph with four inputs `(x, y, z, r)` and five
//! outputs (chassis, wheel, limb, sensor, castor). Node ids `0..4` are the
//! inputs, `4..9` the outputs, and every id from 9 upward is a hidden node.
//! Reproduction is mutation-only: weights, biases and activation parameters
//! are perturbed with polynomial mutation, and the topology grows by
//! splitting connections and adding acyclic links.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_INPUTS: usize = 4;
pub const NUM_OUTPUTS: usize = 5;
const FIRST_HIDDEN: u32 = (NUM_INPUTS + NUM_OUTPUTS) as u32;

/// Activation function of a node, with its parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActivationKind {
    Gaussian { center: f64, width: f64 },
    Sigmoid { slope: f64 },
    Sinusoid { frequency: f64, phase: f64 },
    Linear { slope: f64 },
}

const GAUSS_CENTER: (f64, f64) = (-2.0, 2.0);
const GAUSS_WIDTH: (f64, f64) = (0.05, 2.0);
const SIGMOID_SLOPE: (f64, f64) = (-5.0, 5.0);
const SINE_FREQ: (f64, f64) = (0.5, 8.0);
const SINE_PHASE: (f64, f64) = (-PI, PI);
const LINEAR_SLOPE: (f64, f64) = (-3.0, 3.0);

impl ActivationKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Gaussian { .. } => "gaussian",
            Self::Sigmoid { .. } => "sigmoid",
            Self::Sinusoid { .. } => "sinusoid",
            Self::Linear { .. } => "linear",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Self::Gaussian { center, width } => vec![center, width],
            Self::Sigmoid { slope } | Self::Linear { slope } => vec![slope],
            Self::Sinusoid { frequency, phase } => vec![frequency, phase],
        }
    }

    /// Per-parameter `(lower, upper)` bounds used by mutation.
    pub fn param_bounds(&self) -> &'static [(f64, f64)] {
        match self {
            Self::Gaussian { .. } => &[GAUSS_CENTER, GAUSS_WIDTH],
            Self::Sigmoid { .. } => &[SIGMOID_SLOPE],
            Self::Sinusoid { .. } => &[SINE_FREQ, SINE_PHASE],
            Self::Linear { .. } => &[LINEAR_SLOPE],
        }
    }

    pub fn from_parts(name: &str, params: &[f64]) -> Result<Self> {
        let kind = match (name, params) {
            ("gaussian", &[center, width]) => Self::Gaussian { center, width },
            ("sigmoid", &[slope]) => Self::Sigmoid { slope },
            ("sinusoid", &[frequency, phase]) => Self::Sinusoid { frequency, phase },
            ("linear", &[slope]) => Self::Linear { slope },
            _ => {
                return Err(Error::InvalidGenome(format!(
                    "activation `{name}` with {} parameters",
                    params.len()
                )))
            }
        };
        kind.check()?;
        Ok(kind)
    }

    fn with_params(&self, p: &[f64]) -> Self {
        match self {
            Self::Gaussian { .. } => Self::Gaussian { center: p[0], width: p[1] },
            Self::Sigmoid { .. } => Self::Sigmoid { slope: p[0] },
            Self::Sinusoid { .. } => Self::Sinusoid { frequency: p[0], phase: p[1] },
            Self::Linear { .. } => Self::Linear { slope: p[0] },
        }
    }

    fn check(&self) -> Result<()> {
        if self.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGenome("non-finite activation parameter".into()));
        }
        match *self {
            Self::Gaussian { width, .. } if width <= 0.0 => {
                Err(Error::InvalidGenome("gaussian width must be positive".into()))
            }
            Self::Sinusoid { frequency, .. } if frequency <= 0.0 => {
                Err(Error::InvalidGenome("sinusoid frequency must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// A random kind with parameters drawn uniformly within their bounds.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let proto = match rng.random_range(0..4) {
            0 => Self::Gaussian { center: 0.0, width: 1.0 },
            1 => Self::Sigmoid { slope: 1.0 },
            2 => Self::Sinusoid { frequency: 1.0, phase: 0.0 },
            _ => Self::Linear { slope: 1.0 },
        };
        let p: Vec<f64> = proto
            .param_bounds()
            .iter()
            .map(|&(lo, hi)| rng.random_range(lo..=hi))
            .collect();
        proto.with_params(&p)
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Self::Gaussian { center, width } => {
                let d = (x - center) / width;
                (-0.5 * d * d).exp()
            }
            Self::Sigmoid { slope } => 1.0 / (1.0 + (-slope * x).exp()),
            Self::Sinusoid { frequency, phase } => (frequency * x + phase).sin(),
            Self::Linear { slope } => slope * x,
        }
    }

    /// Map an activation value onto `[0, 1]`.
    #[inline]
    pub fn squash_unit(&self, v: f64) -> f64 {
        match self {
            Self::Gaussian { .. } | Self::Sigmoid { .. } => v,
            Self::Sinusoid { .. } => 0.5 * (v + 1.0),
            Self::Linear { .. } => v.clamp(0.0, 1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: u32,
    pub kind: ActivationKind,
    pub bias: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub src: u32,
    pub dst: u32,
    pub weight: f64,
    pub enabled: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutationParams {
    pub p_add_node: f64,
    pub p_add_connection: f64,
    pub p_toggle: f64,
    pub p_weight: f64,
    pub eta: f64,
    pub weight_bound: f64,
    /// Allow the activation kind of a node to be redrawn.
    pub mutate_kind: bool,
    pub p_kind: f64,
}

impl Default for MutationParams {
    fn default() -> Self {
        Self {
            p_add_node: 0.1,
            p_add_connection: 0.15,
            p_toggle: 0.05,
            p_weight: 0.8,
            eta: 15.0,
            weight_bound: 3.0,
            mutate_kind: false,
            p_kind: 0.05,
        }
    }
}

impl MutationParams {
    /// All probabilities set to zero.
    pub fn frozen() -> Self {
        Self {
            p_add_node: 0.0,
            p_add_connection: 0.0,
            p_toggle: 0.0,
            p_weight: 0.0,
            p_kind: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p_add_node", self.p_add_node),
            ("p_add_connection", self.p_add_connection),
            ("p_toggle", self.p_toggle),
            ("p_weight", self.p_weight),
            ("p_kind", self.p_kind),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is not a probability")));
            }
        }
        if !(self.eta > 0.0) {
            return Err(Error::Config(format!("eta = {} must be positive", self.eta)));
        }
        if !(self.weight_bound > 0.0) {
            return Err(Error::Config("weight_bound must be positive".into()));
        }
        Ok(())
    }
}

/// Polynomial mutation of `x` in `[lo, hi]` driven by the uniform draw `u`.
///
/// The perturbation is `delta * (hi - lo)` with
/// `delta = (2u)^(1/(eta+1)) - 1` for `u < 0.5` and
/// `delta = 1 - (2(1-u))^(1/(eta+1))` otherwise, so `u = 0.5` leaves `x`
/// unchanged and the perturbation distribution is symmetric about zero.
/// The result is clamped to the bounds.
pub fn polynomial_mutation(x: f64, lo: f64, hi: f64, eta: f64, u: f64) -> f64 {
    let expo = 1.0 / (eta + 1.0);
    let delta = if u < 0.5 {
        (2.0 * u).powf(expo) - 1.0
    } else {
        1.0 - (2.0 * (1.0 - u)).powf(expo)
    };
    (x + delta * (hi - lo)).clamp(lo, hi)
}

pub fn polynomial_mutate<R: Rng + ?Sized>(x: f64, lo: f64, hi: f64, eta: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    polynomial_mutation(x, lo, hi, eta, u)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRole {
    Input,
    Output,
    Hidden,
}

pub fn role_of(id: u32) -> NodeRole {
    if (id as usize) < NUM_INPUTS {
        NodeRole::Input
    } else if id < FIRST_HIDDEN {
        NodeRole::Output
    } else {
        NodeRole::Hidden
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GenomeFile", into = "GenomeFile")]
pub struct CppnGenome {
    nodes: Vec<Node>,
    connections: Vec<Connection>,
    innovation: u64,
}

impl CppnGenome {
    /// Build a genome from raw parts, checking every structural invariant.
    pub fn from_parts(mut nodes: Vec<Node>, connections: Vec<Connection>, innovation: u64) -> Result<Self> {
        nodes.sort_by_key(|n| n.id);
        let g = Self { nodes, connections, innovation };
        g.validate()?;
        Ok(g)
    }

    /// Four inputs densely connected to five outputs, weights uniform in
    /// `[-weight_bound, weight_bound]`, random output activations.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, params: &MutationParams) -> Self {
        let wb = params.weight_bound;
        let mut nodes = Vec::with_capacity(FIRST_HIDDEN as usize);
        for id in 0..NUM_INPUTS as u32 {
            nodes.push(Node { id, kind: ActivationKind::Linear { slope: 1.0 }, bias: 0.0 });
        }
        for id in NUM_INPUTS as u32..FIRST_HIDDEN {
            let kind = ActivationKind::random(rng);
            let bias = rng.random_range(-1.0..=1.0);
            nodes.push(Node { id, kind, bias });
        }
        let mut connections = Vec::with_capacity(NUM_INPUTS * NUM_OUTPUTS);
        for src in 0..NUM_INPUTS as u32 {
            for dst in NUM_INPUTS as u32..FIRST_HIDDEN {
                connections.push(Connection { src, dst, weight: rng.random_range(-wb..=wb), enabled: true });
            }
        }
        Self { nodes, connections, innovation: FIRST_HIDDEN as u64 }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn connections(&self) -> &[Connection] {
        &self.connections
    }

    pub fn innovation(&self) -> u64 {
        self.innovation
    }

    fn index_of(&self, id: u32) -> Option<usize> {
        self.nodes.binary_search_by_key(&id, |n| n.id).ok()
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidGenome(m));
        let ids: HashSet<u32> = self.nodes.iter().map(|n| n.id).collect();
        if ids.len() != self.nodes.len() {
            return invalid("duplicate node id".into());
        }
        for id in 0..FIRST_HIDDEN {
            if !ids.contains(&id) {
                return invalid(format!("missing input/output node {id}"));
            }
        }
        for n in &self.nodes {
            n.kind.check()?;
            if !n.bias.is_finite() {
                return invalid(format!("node {} has a non-finite bias", n.id));
            }
            if n.id as u64 >= self.innovation && role_of(n.id) == NodeRole::Hidden {
                return invalid(format!("node {} not below innovation counter", n.id));
            }
        }
        let mut enabled_pairs = HashSet::new();
        for c in &self.connections {
            if !ids.contains(&c.src) || !ids.contains(&c.dst) {
                return invalid(format!("connection {}->{} references a missing node", c.src, c.dst));
            }
            if role_of(c.dst) == NodeRole::Input {
                return invalid(format!("input {} has an incoming connection", c.dst));
            }
            if role_of(c.src) == NodeRole::Output {
                return invalid(format!("output {} has an outgoing connection", c.src));
            }
            if !c.weight.is_finite() {
                return invalid("non-finite weight".into());
            }
            if c.enabled && !enabled_pairs.insert((c.src, c.dst)) {
                return invalid(format!("duplicate enabled connection {}->{}", c.src, c.dst));
            }
        }
        self.topological_order().map(|_| ())
    }

    /// Node indices in topological order over all connections (enabled or not).
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for c in &self.connections {
            let (s, d) = match (self.index_of(c.src), self.index_of(c.dst)) {
                (Some(s), Some(d)) => (s, d),
                _ => return Err(Error::InvalidGenome("dangling connection".into())),
            };
            out[s].push(d);
            indeg[d] += 1;
        }
        let mut stack: Vec<usize> = (0..n).rev().filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = stack.pop() {
            order.push(i);
            for &j in out[i].iter().rev() {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    stack.push(j);
                }
            }
        }
        if order.len() != n {
            return Err(Error::CyclicGenome);
        }
        Ok(order)
    }

    /// Prepare the genome for repeated queries.
    pub fn compile(&self) -> Result<CompiledCppn> {
        let order = self.topological_order()?;
        let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.nodes.len()];
        for c in self.connections.iter().filter(|c| c.enabled) {
            let s = self.index_of(c.src).ok_or(Error::InvalidGenome("dangling connection".into()))?;
            let d = self.index_of(c.dst).ok_or(Error::InvalidGenome("dangling connection".into()))?;
            incoming[d].push((s, c.weight));
        }
        let steps = order
            .into_iter()
            .filter(|&i| role_of(self.nodes[i].id) != NodeRole::Input)
            .map(|i| EvalStep {
                node: i,
                kind: self.nodes[i].kind,
                bias: self.nodes[i].bias,
                incoming: std::mem::take(&mut incoming[i]),
            })
            .collect();
        let output_kinds = std::array::from_fn(|k| self.nodes[NUM_INPUTS + k].kind);
        Ok(CompiledCppn { steps, n_nodes: self.nodes.len(), output_kinds })
    }

    /// Single query of the network at `(x, y, z, r)`.
    pub fn evaluate(&self, x: f64, y: f64, z: f64, r: f64) -> Result<[f64; NUM_OUTPUTS]> {
        let net = self.compile()?;
        Ok(net.evaluate(&mut Vec::new(), [x, y, z, r]))
    }

    /// Mutated copy of this genome. The parent is left untouched.
    pub fn mutate<R: Rng + ?Sized>(&self, params: &MutationParams, rng: &mut R) -> Self {
        let mut child = self.clone();
        let wb = params.weight_bound;
        let eta = params.eta;

        for c in &mut child.connections {
            if rng.random::<f64>() < params.p_weight {
                c.weight = polynomial_mutate(c.weight, -wb, wb, eta, rng);
            }
        }
        for node in child.nodes.iter_mut().filter(|n| role_of(n.id) != NodeRole::Input) {
            if rng.random::<f64>() < params.p_weight {
                node.bias = polynomial_mutate(node.bias, -wb, wb, eta, rng);
            }
            let mut p = node.kind.params();
            for (v, &(lo, hi)) in p.iter_mut().zip(node.kind.param_bounds()) {
                if rng.random::<f64>() < params.p_weight {
                    *v = polynomial_mutate(*v, lo, hi, eta, rng);
                }
            }
            node.kind = node.kind.with_params(&p);
            if params.mutate_kind && rng.random::<f64>() < params.p_kind {
                node.kind = ActivationKind::random(rng);
            }
        }
        for c in &mut child.connections {
            if rng.random::<f64>() < params.p_toggle {
                c.enabled = !c.enabled;
            }
        }
        if rng.random::<f64>() < params.p_add_node {
            child.add_node(params, rng);
        }
        if rng.random::<f64>() < params.p_add_connection {
            child.add_connection(params, rng);
        }
        debug_assert!(child.validate().is_ok());
        child
    }

    /// Split a random enabled connection with a new hidden node.
    fn add_node<R: Rng + ?Sized>(&mut self, params: &MutationParams, rng: &mut R) {
        let enabled: Vec<usize> = (0..self.connections.len()).filter(|&i| self.connections[i].enabled).collect();
        if enabled.is_empty() {
            return;
        }
        let ci = enabled[rng.random_range(0..enabled.len())];
        let (src, dst, weight) = {
            let c = &mut self.connections[ci];
            c.enabled = false;
            (c.src, c.dst, c.weight)
        };
        let id = u32::try_from(self.innovation).expect("node id overflow");
        self.innovation += 1;
        let kind = ActivationKind::random(rng);
        self.nodes.push(Node { id, kind, bias: 0.0 });
        let wb = params.weight_bound;
        self.connections.push(Connection { src, dst: id, weight: 1.0f64.min(wb), enabled: true });
        self.connections.push(Connection { src: id, dst, weight, enabled: true });
    }

    /// Add a new link between unconnected nodes if one can be found that
    /// keeps the graph acyclic. Gives up after a bounded number of draws.
    fn add_connection<R: Rng + ?Sized>(&mut self, params: &MutationParams, rng: &mut R) {
        let existing: HashSet<(u32, u32)> = self.connections.iter().map(|c| (c.src, c.dst)).collect();
        let sources: Vec<u32> = self.nodes.iter().map(|n| n.id).filter(|&id| role_of(id) != NodeRole::Output).collect();
        let targets: Vec<u32> = self.nodes.iter().map(|n| n.id).filter(|&id| role_of(id) != NodeRole::Input).collect();
        for _ in 0..20 {
            let src = sources[rng.random_range(0..sources.len())];
            let dst = targets[rng.random_range(0..targets.len())];
            if src == dst || existing.contains(&(src, dst)) || self.reaches(dst, src) {
                continue;
            }
            let wb = params.weight_bound;
            self.connections.push(Connection { src, dst, weight: rng.random_range(-wb..=wb), enabled: true });
            return;
        }
    }

    /// Whether `to` is reachable from `from` along any connection.
    fn reaches(&self, from: u32, to: u32) -> bool {
        let mut adj: HashMap<u32, Vec<u32>> = HashMap::new();
        for c in &self.connections {
            adj.entry(c.src).or_default().push(c.dst);
        }
        let mut seen = HashSet::new();
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if seen.insert(n) {
                if let Some(next) = adj.get(&n) {
                    stack.extend(next);
                }
            }
        }
        false
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

struct EvalStep {
    node: usize,
    kind: ActivationKind,
    bias: f64,
    incoming: Vec<(usize, f64)>,
}

/// A genome flattened into an evaluation schedule.
pub struct CompiledCppn {
    steps: Vec<EvalStep>,
    n_nodes: usize,
    output_kinds: [ActivationKind; NUM_OUTPUTS],
}

impl CompiledCppn {
    /// Forward pass. `scratch` is resized as needed and may be reused.
    pub fn evaluate(&self, scratch: &mut Vec<f64>, inputs: [f64; NUM_INPUTS]) -> [f64; NUM_OUTPUTS] {
        scratch.clear();
        scratch.resize(self.n_nodes, 0.0);
        scratch[..NUM_INPUTS].copy_from_slice(&inputs);
        for step in &self.steps {
            let sum = step.incoming.iter().fold(step.bias, |acc, &(s, w)| acc + w * scratch[s]);
            scratch[step.node] = step.kind.apply(sum);
        }
        std::array::from_fn(|k| scratch[NUM_INPUTS + k])
    }

    pub fn output_kinds(&self) -> &[ActivationKind; NUM_OUTPUTS] {
        &self.output_kinds
    }
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    id: u32,
    kind: String,
    params: Vec<f64>,
    bias: f64,
}

#[derive(Serialize, Deserialize)]
struct GenomeMeta {
    innovation: u64,
}

#[derive(Serialize, Deserialize)]
struct GenomeFile {
    nodes: Vec<NodeRecord>,
    connections: Vec<Connection>,
    meta: GenomeMeta,
}

impl From<CppnGenome> for GenomeFile {
    fn from(g: CppnGenome) -> Self {
        let nodes = g
            .nodes
            .into_iter()
            .map(|n| NodeRecord { id: n.id, kind: n.kind.name().to_string(), params: n.kind.params(), bias: n.bias })
            .collect();
        Self { nodes, connections: g.connections, meta: GenomeMeta { innovation: g.innovation } }
    }
}

impl TryFrom<GenomeFile> for CppnGenome {
    type Error = Error;

    fn try_from(f: GenomeFile) -> Result<Self> {
        let nodes = f
            .nodes
            .into_iter()
            .map(|r| Ok(Node { id: r.id, kind: ActivationKind::from_parts(&r.kind, &r.params)?, bias: r.bias }))
            .collect::<Result<Vec<_>>>()?;
        CppnGenome::from_parts(nodes, f.connections, f.meta.innovation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;

    fn linear(id: u32) -> Node {
        Node { id, kind: ActivationKind::Linear { slope: 1.0 }, bias: 0.0 }
    }

    fn io_nodes() -> Vec<Node> {
        (0..FIRST_HIDDEN).map(linear).collect()
    }

    #[test]
    fn random_genome_shape() {
        let p = MutationParams { weight_bound: 1.0, ..Default::default() };
        let g = CppnGenome::random(&mut seeds::rng(0), &p);
        assert_eq!(g.nodes().len(), 9);
        assert_eq!(g.connections().len(), 20);
        assert!(g.connections().iter().all(|c| c.weight.abs() <= 1.0));
        g.validate().unwrap();
    }

    #[test]
    fn random_genome_is_deterministic() {
        let p = MutationParams::default();
        let a = CppnGenome::random(&mut seeds::rng(42), &p).to_json().unwrap();
        let b = CppnGenome::random(&mut seeds::rng(42), &p).to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_weights_have_zero_mean() {
        let p = MutationParams { weight_bound: 1.0, ..Default::default() };
        let mut sum = 0.0;
        let mut count = 0;
        for seed in 0..1000 {
            let g = CppnGenome::random(&mut seeds::rng(seed), &p);
            for c in g.connections() {
                sum += c.weight;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        assert!(mean.abs() <= 0.05, "mean {mean}");
    }

    #[test]
    fn zero_network_outputs_zero() {
        let conns = (0..4)
            .flat_map(|s| (4..9).map(move |d| Connection { src: s, dst: d, weight: 0.0, enabled: true }))
            .collect();
        let g = CppnGenome::from_parts(io_nodes(), conns, 9).unwrap();
        assert_eq!(g.evaluate(0.3, -0.7, 1.0, 0.9).unwrap(), [0.0; 5]);
    }

    #[test]
    fn identity_path() {
        let conns = vec![Connection { src: 0, dst: 4, weight: 1.0, enabled: true }];
        let g = CppnGenome::from_parts(io_nodes(), conns, 9).unwrap();
        let out = g.evaluate(0.37, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(out[0], 0.37);
    }

    #[test]
    fn cycle_is_rejected() {
        let mut nodes = io_nodes();
        nodes.push(linear(9));
        nodes.push(linear(10));
        let conns = vec![
            Connection { src: 0, dst: 9, weight: 1.0, enabled: true },
            Connection { src: 9, dst: 10, weight: 1.0, enabled: true },
            Connection { src: 10, dst: 9, weight: 1.0, enabled: false },
        ];
        assert!(matches!(CppnGenome::from_parts(nodes, conns, 11), Err(Error::CyclicGenome)));
    }

    #[test]
    fn input_with_incoming_is_rejected() {
        let conns = vec![Connection { src: 1, dst: 0, weight: 1.0, enabled: true }];
        assert!(CppnGenome::from_parts(io_nodes(), conns, 9).is_err());
    }

    #[test]
    fn frozen_mutation_is_identity() {
        let p = MutationParams::default();
        let g = CppnGenome::random(&mut seeds::rng(3), &p);
        let child = g.mutate(&MutationParams::frozen(), &mut seeds::rng(4));
        assert_eq!(child, g);
    }

    #[test]
    fn polynomial_mutation_symmetric_point() {
        assert_eq!(polynomial_mutation(0.25, -3.0, 3.0, 15.0, 0.5), 0.25);
        assert_eq!(polynomial_mutation(0.0, -1.0, 1.0, 20.0, 0.0), -1.0);
    }

    #[test]
    fn polynomial_mutation_monte_carlo() {
        // Perturbation distribution is symmetric about 0, so the mean shift of a
        // weight sitting at the centre of its bounds is 0.
        let mut rng = seeds::rng(11);
        let mut sum = 0.0;
        for _ in 0..10_000 {
            let w = polynomial_mutate(0.0, -3.0, 3.0, 20.0, &mut rng);
            assert!((-3.0..=3.0).contains(&w));
            sum += w;
        }
        let shift = sum / 10_000.0;
        assert!(shift.abs() <= 0.01, "shift {shift}");
    }

    #[test]
    fn json_field_names() {
        let g = CppnGenome::random(&mut seeds::rng(1), &MutationParams::default());
        let v: serde_json::Value = serde_json::from_str(&g.to_json().unwrap()).unwrap();
        assert!(v["nodes"][0].get("kind").is_some());
        assert!(v["nodes"][0].get("params").is_some());
        assert!(v["connections"][0].get("src").is_some());
        assert_eq!(v["meta"]["innovation"], 9);
    }

    #[test]
    fn bad_activation_arity_rejected() {
        assert!(ActivationKind::from_parts("gaussian", &[0.0]).is_err());
        assert!(ActivationKind::from_parts("gaussian", &[0.0, -1.0]).is_err());
        assert!(ActivationKind::from_parts("sinusoid", &[0.0, 0.0]).is_err());
    }
}
