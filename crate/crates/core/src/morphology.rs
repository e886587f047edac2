//! Voxel robot designs decoded from a CPPN, their morphological descriptor
//! and the k-nearest-neighbour sparsity score.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cppn::CppnGenome;
use crate::error::{Error, Result};

pub const GRID: usize = 11;
pub const CELLS: usize = GRID * GRID * GRID;
const CENTER: i32 = (GRID / 2) as i32;
pub const HEAD: [u8; 3] = [CENTER as u8, CENTER as u8, 0];
pub const MAX_COMPONENTS: usize = 8;
pub const DEFAULT_CONTENT_THRESHOLD: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoxelContent {
    Empty,
    Chassis,
    Wheel,
    Limb,
    Sensor,
    Castor,
}

impl VoxelContent {
    const ALL: [Self; 6] = [Self::Empty, Self::Chassis, Self::Wheel, Self::Limb, Self::Sensor, Self::Castor];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }

    /// Value stored in the morphological descriptor: chassis and empty are both 0.
    pub fn descriptor_value(self) -> u8 {
        match self {
            Self::Empty | Self::Chassis => 0,
            Self::Wheel => 1,
            Self::Limb => 2,
            Self::Sensor => 3,
            Self::Castor => 4,
        }
    }

    pub fn component(self) -> Option<ComponentKind> {
        match self {
            Self::Wheel => Some(ComponentKind::Wheel),
            Self::Limb => Some(ComponentKind::Limb),
            Self::Sensor => Some(ComponentKind::Sensor),
            Self::Castor => Some(ComponentKind::Castor),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Wheel,
    Limb,
    Sensor,
    Castor,
}

impl ComponentKind {
    pub fn content(self) -> VoxelContent {
        match self {
            Self::Wheel => VoxelContent::Wheel,
            Self::Limb => VoxelContent::Limb,
            Self::Sensor => VoxelContent::Sensor,
            Self::Castor => VoxelContent::Castor,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Wheel => "wheel",
            Self::Limb => "limb",
            Self::Sensor => "sensor",
            Self::Castor => "castor",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Component {
    pub kind: ComponentKind,
    pub pos: [u8; 3],
    pub normal: [i8; 3],
}

#[inline]
pub fn index(p: [u8; 3]) -> usize {
    (p[0] as usize * GRID + p[1] as usize) * GRID + p[2] as usize
}

#[inline]
pub fn coords(i: usize) -> [u8; 3] {
    [(i / (GRID * GRID)) as u8, ((i / GRID) % GRID) as u8, (i % GRID) as u8]
}

/// Face directions, in tie-breaking order.
pub const DIRECTIONS: [[i8; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];

fn step(p: [u8; 3], d: [i8; 3]) -> Option<[u8; 3]> {
    let mut q = [0u8; 3];
    for a in 0..3 {
        let v = p[a] as i32 + d[a] as i32;
        if !(0..GRID as i32).contains(&v) {
            return None;
        }
        q[a] = v as u8;
    }
    Some(q)
}

/// Normalised CPPN inputs `(x, y, z, r)` for a voxel.
pub fn voxel_inputs(p: [u8; 3]) -> [f64; 4] {
    let c = CENTER as f64;
    let x = p[0] as f64 / c - 1.0;
    let y = p[1] as f64 / c - 1.0;
    let z = p[2] as f64 / c - 1.0;
    let r = (x * x + y * y + z * z).sqrt() / 3f64.sqrt();
    [x, y, z, r]
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RobotDesign {
    grid: Vec<VoxelContent>,
    components: Vec<Component>,
    id: u64,
}

impl RobotDesign {
    /// Assemble a design from a grid and component list, checking every
    /// structural invariant.
    pub fn from_parts(grid: Vec<VoxelContent>, mut components: Vec<Component>) -> Result<Self> {
        components.sort_by_key(|c| c.pos);
        let id = design_hash(&grid, &components);
        let d = Self { grid, components, id };
        d.validate()?;
        Ok(d)
    }

    pub fn head_only() -> Self {
        let mut grid = vec![VoxelContent::Empty; CELLS];
        grid[index(HEAD)] = VoxelContent::Chassis;
        Self::from_parts(grid, Vec::new()).expect("head-only design is valid")
    }

    pub fn grid(&self) -> &[VoxelContent] {
        &self.grid
    }

    pub fn at(&self, p: [u8; 3]) -> VoxelContent {
        self.grid[index(p)]
    }

    /// Components in lexicographic voxel order. This order fixes the layout
    /// of sensor and action vectors.
    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn id_hex(&self) -> String {
        format!("{:016x}", self.id)
    }

    pub fn count(&self, kind: ComponentKind) -> usize {
        self.components.iter().filter(|c| c.kind == kind).count()
    }

    pub fn chassis_voxels(&self) -> usize {
        self.grid.iter().filter(|&&v| v == VoxelContent::Chassis).count()
    }

    /// Chassis extent `(width along x, depth along y, height along z, voxel count)`.
    pub fn chassis_extent(&self) -> (usize, usize, usize, usize) {
        let mut lo = [u8::MAX; 3];
        let mut hi = [0u8; 3];
        let mut n = 0;
        for (i, v) in self.grid.iter().enumerate() {
            if *v == VoxelContent::Chassis {
                let p = coords(i);
                for a in 0..3 {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
                n += 1;
            }
        }
        let ext = |a: usize| (hi[a] - lo[a]) as usize + 1;
        (ext(0), ext(1), ext(2), n)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidDesign(m.to_string()));
        if self.grid.len() != CELLS {
            return bad("grid must be 11x11x11");
        }
        if self.at(HEAD) != VoxelContent::Chassis {
            return bad("head voxel missing");
        }
        if self.components.len() > MAX_COMPONENTS {
            return bad("more than 8 components");
        }
        let reached = flood_chassis(&self.grid);
        if self.grid.iter().zip(&reached).any(|(v, r)| *v == VoxelContent::Chassis && !r) {
            return bad("chassis is not connected to the head");
        }
        let n_component_voxels = self.grid.iter().filter(|v| v.component().is_some()).count();
        if n_component_voxels != self.components.len() {
            return bad("component list does not match grid");
        }
        for c in &self.components {
            if self.at(c.pos) != c.kind.content() {
                return bad("component kind does not match grid");
            }
            let attached = DIRECTIONS
                .iter()
                .any(|&d| step(c.pos, d).is_some_and(|q| self.at(q) == VoxelContent::Chassis));
            if !attached {
                return bad("component not attached to the chassis");
            }
            if !placement_valid(c.kind, c.normal) {
                return bad("component normal invalid for its kind");
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&DesignFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: DesignFile = serde_json::from_str(s)?;
        Self::try_from(f)
    }
}

fn placement_valid(kind: ComponentKind, normal: [i8; 3]) -> bool {
    match kind {
        ComponentKind::Wheel => normal[2] == 0,
        ComponentKind::Castor => normal == [0, 0, -1],
        ComponentKind::Limb | ComponentKind::Sensor => true,
    }
}

fn design_hash(grid: &[VoxelContent], components: &[Component]) -> u64 {
    let mut h = Sha256::new();
    let bytes: Vec<u8> = grid.iter().map(|v| v.code()).collect();
    h.update(&bytes);
    for c in components {
        h.update(c.normal.map(|v| v as u8));
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest has at least 8 bytes"))
}

fn flood_chassis(grid: &[VoxelContent]) -> Vec<bool> {
    let mut seen = vec![false; grid.len()];
    if grid[index(HEAD)] != VoxelContent::Chassis {
        return seen;
    }
    let mut queue = VecDeque::from([HEAD]);
    seen[index(HEAD)] = true;
    while let Some(p) = queue.pop_front() {
        for d in DIRECTIONS {
            if let Some(q) = step(p, d) {
                let qi = index(q);
                if !seen[qi] && grid[qi] == VoxelContent::Chassis {
                    seen[qi] = true;
                    queue.push_back(q);
                }
            }
        }
    }
    seen
}

/// Outward normal of a component voxel: the direction of the empty (or
/// out-of-grid) neighbour farthest from the grid centre.
fn outward_normal(grid: &[VoxelContent], p: [u8; 3]) -> Option<[i8; 3]> {
    let mut best: Option<([i8; 3], i32)> = None;
    for d in DIRECTIONS {
        let empty = match step(p, d) {
            Some(q) => grid[index(q)] == VoxelContent::Empty,
            None => true,
        };
        if !empty {
            continue;
        }
        let dist2: i32 = (0..3)
            .map(|a| {
                let v = p[a] as i32 + d[a] as i32 - CENTER;
                v * v
            })
            .sum();
        if best.is_none_or(|(_, b)| dist2 > b) {
            best = Some((d, dist2));
        }
    }
    best.map(|(d, _)| d)
}

/// Query the CPPN at every voxel and build a valid design.
///
/// A voxel is empty when the largest of its five outputs (each mapped onto
/// `[0, 1]`) is below `threshold`, otherwise it takes the arg-max category.
/// The head is forced, chassis disconnected from it is dropped, components
/// must touch the surviving chassis and have a valid outward normal, and at
/// most eight are kept (highest activation first, ties by voxel coordinate).
pub fn decode(genome: &CppnGenome, threshold: f64) -> RobotDesign {
    let (mut grid, activation) = raw_pattern(genome, threshold);
    grid[index(HEAD)] = VoxelContent::Chassis;

    let reached = flood_chassis(&grid);
    for (v, r) in grid.iter_mut().zip(&reached) {
        if *v == VoxelContent::Chassis && !r {
            *v = VoxelContent::Empty;
        }
    }
    for i in 0..CELLS {
        if grid[i].component().is_some() {
            let p = coords(i);
            let attached = DIRECTIONS
                .iter()
                .any(|&d| step(p, d).is_some_and(|q| grid[index(q)] == VoxelContent::Chassis));
            if !attached {
                grid[i] = VoxelContent::Empty;
            }
        }
    }

    let mut candidates: Vec<(Component, f64)> = Vec::new();
    for i in 0..CELLS {
        if let Some(kind) = grid[i].component() {
            let pos = coords(i);
            if let Some(normal) = outward_normal(&grid, pos) {
                if placement_valid(kind, normal) {
                    candidates.push((Component { kind, pos, normal }, activation[i]));
                }
            }
        }
    }
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.pos.cmp(&b.0.pos)));
    candidates.truncate(MAX_COMPONENTS);

    for v in grid.iter_mut() {
        if v.component().is_some() {
            *v = VoxelContent::Empty;
        }
    }
    let components: Vec<Component> = candidates.into_iter().map(|(c, _)| c).collect();
    for c in &components {
        grid[index(c.pos)] = c.kind.content();
    }
    RobotDesign::from_parts(grid, components).expect("decode produces a valid design")
}

/// Per-voxel category and winning activation before any structural repair.
pub fn raw_pattern(genome: &CppnGenome, threshold: f64) -> (Vec<VoxelContent>, Vec<f64>) {
    let net = genome.compile().expect("validated genomes are acyclic");
    let kinds = *net.output_kinds();
    let mut scratch = Vec::new();
    let mut grid = vec![VoxelContent::Empty; CELLS];
    let mut activation = vec![0.0; CELLS];
    for i in 0..CELLS {
        let out = net.evaluate(&mut scratch, voxel_inputs(coords(i)));
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for k in 0..5 {
            let v = kinds[k].squash_unit(out[k]);
            if v > best_v {
                best_v = v;
                best = k;
            }
        }
        activation[i] = best_v;
        if best_v >= threshold {
            grid[i] = VoxelContent::ALL[best + 1];
        }
    }
    (grid, activation)
}

/// Sparse component-type matrix of a design. Entries are `(voxel index, value)`
/// sorted by index; chassis and empty voxels are not stored.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MorphDescriptor {
    entries: Vec<(u16, u8)>,
}

impl MorphDescriptor {
    pub fn from_design(design: &RobotDesign) -> Self {
        let mut entries: Vec<(u16, u8)> = design
            .components()
            .iter()
            .map(|c| (index(c.pos) as u16, c.kind.content().descriptor_value()))
            .collect();
        entries.sort_unstable();
        Self { entries }
    }

    /// Build from `(position, value)` pairs; zero values are dropped.
    pub fn from_entries(pairs: impl IntoIterator<Item = ([u8; 3], u8)>) -> Self {
        let mut entries: Vec<(u16, u8)> =
            pairs.into_iter().filter(|&(_, v)| v != 0).map(|(p, v)| (index(p) as u16, v)).collect();
        entries.sort_unstable();
        entries.dedup_by_key(|e| e.0);
        Self { entries }
    }

    pub fn entries(&self) -> impl Iterator<Item = ([u8; 3], u8)> + '_ {
        self.entries.iter().map(|&(i, v)| (coords(i as usize), v))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn dense(&self) -> Vec<u8> {
        let mut d = vec![0u8; CELLS];
        for &(i, v) in &self.entries {
            d[i as usize] = v;
        }
        d
    }

    /// Euclidean distance between the flattened 1331-dimensional matrices,
    /// computed over the union of non-zero entries.
    pub fn distance(&self, other: &Self) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut sum: u64 = 0;
        let sq = |v: i32| (v * v) as u64;
        while i < a.len() || j < b.len() {
            match (a.get(i), b.get(j)) {
                (Some(&(ia, va)), Some(&(ib, vb))) if ia == ib => {
                    sum += sq(va as i32 - vb as i32);
                    i += 1;
                    j += 1;
                }
                (Some(&(ia, va)), Some(&(ib, _))) if ia < ib => {
                    sum += sq(va as i32);
                    i += 1;
                }
                (Some(&(_, va)), None) => {
                    sum += sq(va as i32);
                    i += 1;
                }
                (_, Some(&(_, vb))) => {
                    sum += sq(vb as i32);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        (sum as f64).sqrt()
    }

    /// CSV with header `x,y,z,kind`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,z,kind\n");
        for (p, v) in self.entries() {
            let _ = writeln!(s, "{},{},{},{}", p[0], p[1], p[2], v);
        }
        s
    }
}

/// Mean distance from `target` to its `k` nearest members of `pool`.
///
/// `pool` must not contain the target itself (callers exclude it by index).
pub fn sparsity_score(target: &MorphDescriptor, pool: &[MorphDescriptor], k: usize) -> Result<f64> {
    if pool.len() < k || k == 0 {
        return Err(Error::PoolTooSmall { required: k.max(1), actual: pool.len() });
    }
    let mut d: Vec<f64> = pool.iter().map(|p| target.distance(p)).collect();
    d.sort_unstable_by(f64::total_cmp);
    Ok(d[..k].iter().sum::<f64>() / k as f64)
}

/// Sparsity of every member of `all` against the rest of `all`.
pub fn sparsity_scores(all: &[MorphDescriptor], k: usize) -> Result<Vec<f64>> {
    if all.len() < k + 1 {
        return Err(Error::PoolTooSmall { required: k + 1, actual: all.len() });
    }
    let n = all.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = all[i].distance(&all[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    Ok((0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist[i * n + j]).collect();
            row.sort_unstable_by(f64::total_cmp);
            row[..k].iter().sum::<f64>() / k as f64
        })
        .collect())
}

#[derive(Serialize, Deserialize)]
struct DesignFile {
    id: String,
    head: [u8; 3],
    /// Run-length encoded grid in x-major order: `[content code, run length]`.
    grid: Vec<[u32; 2]>,
    components: Vec<Component>,
}

impl From<&RobotDesign> for DesignFile {
    fn from(d: &RobotDesign) -> Self {
        let mut runs: Vec<[u32; 2]> = Vec::new();
        for v in &d.grid {
            let c = v.code() as u32;
            match runs.last_mut() {
                Some(last) if last[0] == c => last[1] += 1,
                _ => runs.push([c, 1]),
            }
        }
        Self { id: d.id_hex(), head: HEAD, grid: runs, components: d.components.clone() }
    }
}

impl TryFrom<DesignFile> for RobotDesign {
    type Error = Error;

    fn try_from(f: DesignFile) -> Result<Self> {
        let mut grid = Vec::with_capacity(CELLS);
        for [code, run] in f.grid {
            let v = u8::try_from(code)
                .ok()
                .and_then(VoxelContent::from_code)
                .ok_or_else(|| Error::InvalidDesign(format!("unknown voxel code {code}")))?;
            if grid.len() + run as usize > CELLS {
                return Err(Error::InvalidDesign("grid longer than 1331 voxels".into()));
            }
            grid.extend(std::iter::repeat_n(v, run as usize));
        }
        if f.head != HEAD {
            return Err(Error::InvalidDesign("head must sit at the middle-bottom voxel".into()));
        }
        let d = RobotDesign::from_parts(grid, f.components)?;
        if d.id_hex() != f.id {
            return Err(Error::InvalidDesign(format!("id mismatch: file says {}, content hashes to {}", f.id, d.id_hex())));
        }
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cppn::{ActivationKind, Connection, MutationParams, Node};
    use crate::seeds;

    fn constant_genome(biases: [f64; 5]) -> CppnGenome {
        let mut nodes: Vec<Node> =
            (0..4).map(|id| Node { id, kind: ActivationKind::Linear { slope: 1.0 }, bias: 0.0 }).collect();
        for (k, b) in biases.iter().enumerate() {
            nodes.push(Node { id: 4 + k as u32, kind: ActivationKind::Linear { slope: 1.0 }, bias: *b });
        }
        CppnGenome::from_parts(nodes, Vec::<Connection>::new(), 9).unwrap()
    }

    #[test]
    fn below_threshold_is_head_only() {
        let d = decode(&constant_genome([0.1; 5]), DEFAULT_CONTENT_THRESHOLD);
        assert_eq!(d, RobotDesign::head_only());
        assert_eq!(d.components().len(), 0);
        assert_eq!(MorphDescriptor::from_design(&d).nnz(), 0);
    }

    #[test]
    fn decode_is_deterministic() {
        let g = CppnGenome::random(&mut seeds::rng(5), &MutationParams::default());
        assert_eq!(decode(&g, 0.3).id(), decode(&g, 0.3).id());
    }

    #[test]
    fn full_chassis_block() {
        let d = decode(&constant_genome([0.9, 0.0, 0.0, 0.0, 0.0]), 0.3);
        assert_eq!(d.chassis_voxels(), CELLS);
        assert_eq!(d.chassis_extent(), (11, 11, 11, CELLS));
    }

    #[test]
    fn single_wheel_descriptor() {
        let mut grid = vec![VoxelContent::Empty; CELLS];
        for x in 1..=5 {
            grid[index([x, 5, 0])] = VoxelContent::Chassis;
        }
        // (0,5,5) sits beside no chassis; build a column to reach it.
        for z in 0..=5 {
            grid[index([1, 5, z])] = VoxelContent::Chassis;
        }
        grid[index([0, 5, 5])] = VoxelContent::Wheel;
        let c = Component { kind: ComponentKind::Wheel, pos: [0, 5, 5], normal: [-1, 0, 0] };
        let d = RobotDesign::from_parts(grid, vec![c]).unwrap();
        let desc = MorphDescriptor::from_design(&d);
        assert_eq!(desc.entries().collect::<Vec<_>>(), vec![([0, 5, 5], 1)]);
    }

    #[test]
    fn descriptor_distance_unit() {
        let a = MorphDescriptor::from_entries([([1, 2, 3], 2)]);
        let b = MorphDescriptor::from_entries([([1, 2, 3], 1)]);
        assert_eq!(sparsity_score(&a, &[b], 1).unwrap(), 1.0);
    }

    #[test]
    fn identical_pool_is_zero() {
        let a = MorphDescriptor::from_entries([([1, 2, 3], 2), ([4, 4, 4], 3)]);
        let pool = vec![a.clone(); 15];
        assert_eq!(sparsity_score(&a, &pool, 15).unwrap(), 0.0);
    }

    #[test]
    fn small_pool_error_names_sizes() {
        let a = MorphDescriptor::default();
        let err = sparsity_score(&a, &[a.clone(), a.clone()], 15).unwrap_err();
        assert!(matches!(err, Error::PoolTooSmall { required: 15, actual: 2 }));
        assert!(err.to_string().contains("15") && err.to_string().contains('2'));
    }

    #[test]
    fn design_file_round_trip() {
        let g = CppnGenome::random(&mut seeds::rng(9), &MutationParams::default());
        let d = decode(&g, 0.3);
        let json = d.to_json().unwrap();
        let back = RobotDesign::from_json(&json).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_json().unwrap(), json);
    }

    #[test]
    fn descriptor_csv_header() {
        let a = MorphDescriptor::from_entries([([0, 5, 5], 1)]);
        assert_eq!(a.to_csv(), "x,y,z,kind\n0,5,5,1\n");
    }
}
