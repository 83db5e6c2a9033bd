//! Strongly connected components, Morse graph and terminal classes.

use super::{BoxError, BoxMap, BoxSet};
use rand::Rng;
use rayon::prelude::*;
use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

const UNSET: u32 = u32::MAX;

/// A nontrivial SCC: at least two boxes, or one box with a self-loop.
#[derive(Clone, Debug, PartialEq)]
pub struct MorseClass {
    /// SCC id in `MorseGraph::component`.
    pub component: u32,
    /// Sorted box indices.
    pub boxes: Vec<u32>,
    pub terminal: bool,
}

#[derive(Clone, Debug)]
pub struct MorseGraph {
    /// SCC id of each box; ids are in reverse topological order, so every
    /// edge b → s has component[s] ≤ component[b].
    pub component: Vec<u32>,
    pub components: usize,
    /// Nontrivial classes ordered by SCC id.
    pub classes: Vec<MorseClass>,
    /// Edges between classes (indices into `classes`) through transient
    /// boxes.
    pub edges: Vec<(usize, usize)>,
    pub acyclic: bool,
    pub n: u32,
    pub eps_chain: f64,
    pub rigorous: bool,
}

impl MorseGraph {
    pub fn class_of(&self, b: u32) -> Option<usize> {
        let c = self.component[b as usize];
        self.classes.binary_search_by_key(&c, |k| k.component).ok()
    }

    pub fn is_transient(&self, b: u32) -> bool {
        self.class_of(b).is_none()
    }

    pub fn terminal_classes(&self) -> impl Iterator<Item = (usize, &MorseClass)> {
        self.classes.iter().enumerate().filter(|(_, c)| c.terminal)
    }

    pub fn edges_csv(&self) -> String {
        let mut s = String::from("from,to\n");
        for (a, b) in &self.edges {
            let _ = writeln!(s, "{a},{b}");
        }
        s
    }

    pub fn summary(&self, delta: Option<f64>) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n: {}", self.n);
        let _ = writeln!(s, "pitch: {:e}", 1.0 / self.n as f64);
        if let Some(d) = delta {
            let _ = writeln!(s, "pitch_over_delta: {:e}", 1.0 / (self.n as f64 * d));
        }
        let _ = writeln!(s, "eps_chain: {:e}", self.eps_chain);
        let _ = writeln!(s, "rigorous: {}", self.rigorous);
        let _ = writeln!(s, "boxes: {}", self.component.len());
        let _ = writeln!(s, "components: {}", self.components);
        let _ = writeln!(s, "nontrivial_classes: {}", self.classes.len());
        let _ = writeln!(s, "terminal_classes: {}", self.terminal_classes().count());
        let _ = writeln!(s, "acyclic: {}", self.acyclic);
        for (i, c) in self.classes.iter().enumerate() {
            let _ = writeln!(s, "class.{i}.boxes: {}", c.boxes.len());
            let _ = writeln!(s, "class.{i}.terminal: {}", c.terminal);
        }
        let _ = writeln!(s, "edges: {}", self.edges.len());
        s
    }
}

/// Iterative Tarjan over the raw successor slots.
fn tarjan(bm: &BoxMap) -> (Vec<u32>, usize) {
    let total = bm.grid().len();
    let mut index = vec![UNSET; total];
    let mut low = vec![0u32; total];
    let mut comp = vec![UNSET; total];
    let mut stack: Vec<u32> = Vec::new();
    let mut call: Vec<(u32, u32)> = Vec::new();
    let mut next = 0u32;
    let mut ncomp = 0u32;
    for root in 0..total as u32 {
        if index[root as usize] != UNSET {
            continue;
        }
        index[root as usize] = next;
        low[root as usize] = next;
        next += 1;
        stack.push(root);
        call.push((root, 0));
        while let Some(top) = call.last_mut() {
            let v = top.0;
            let j = top.1 as usize;
            if j < bm.degree(v) {
                top.1 += 1;
                let w = bm.successor(v, j);
                if index[w as usize] == UNSET {
                    index[w as usize] = next;
                    low[w as usize] = next;
                    next += 1;
                    stack.push(w);
                    call.push((w, 0));
                } else if comp[w as usize] == UNSET {
                    let iw = index[w as usize];
                    if iw < low[v as usize] {
                        low[v as usize] = iw;
                    }
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    let lv = low[v as usize];
                    if lv < low[u as usize] {
                        low[u as usize] = lv;
                    }
                }
                if low[v as usize] == index[v as usize] {
                    loop {
                        let w = stack.pop().expect("v is on the stack");
                        comp[w as usize] = ncomp;
                        if w == v {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    (comp, ncomp as usize)
}

/// SCC condensation of the box map, with acyclicity verified edge by edge.
pub fn morse_graph(bm: &BoxMap) -> MorseGraph {
    let total = bm.grid().len();
    let (component, ncomp) = tarjan(bm);

    let sizes: Vec<AtomicU64> = (0..ncomp).map(|_| AtomicU64::new(0)).collect();
    let self_loop: Vec<AtomicBool> = (0..ncomp).map(|_| AtomicBool::new(false)).collect();
    let exits: Vec<AtomicBool> = (0..ncomp).map(|_| AtomicBool::new(false)).collect();
    let backward = AtomicBool::new(false);
    (0..total as u32).into_par_iter().for_each(|b| {
        let cb = component[b as usize];
        sizes[cb as usize].fetch_add(1, Ordering::Relaxed);
        for j in 0..bm.degree(b) {
            let s = bm.successor(b, j);
            let cs = component[s as usize];
            if s == b {
                self_loop[cb as usize].store(true, Ordering::Relaxed);
            }
            if cs != cb {
                exits[cb as usize].store(true, Ordering::Relaxed);
                if cs > cb {
                    backward.store(true, Ordering::Relaxed);
                }
            }
        }
    });
    let nontrivial: Vec<bool> =
        (0..ncomp).map(|c| sizes[c].load(Ordering::Relaxed) >= 2 || self_loop[c].load(Ordering::Relaxed)).collect();
    let mut members: HashMap<u32, Vec<u32>> = HashMap::new();
    for (b, &c) in component.iter().enumerate() {
        if nontrivial[c as usize] {
            members.entry(c).or_default().push(b as u32);
        }
    }
    let mut ids: Vec<u32> = members.keys().copied().collect();
    ids.sort_unstable();
    let classes: Vec<MorseClass> = ids
        .iter()
        .map(|&c| MorseClass {
            component: c,
            boxes: members.remove(&c).expect("collected"),
            terminal: !exits[c as usize].load(Ordering::Relaxed),
        })
        .collect();

    let mut mg = MorseGraph {
        component,
        components: ncomp,
        classes,
        edges: Vec::new(),
        acyclic: !backward.load(Ordering::Relaxed),
        n: bm.grid().n(),
        eps_chain: bm.eps_chain(),
        rigorous: bm.is_rigorous(),
    };
    mg.edges = class_edges(bm, &mg);
    mg
}

/// For each class, the classes first reached by paths through transient
/// boxes.
fn class_edges(bm: &BoxMap, mg: &MorseGraph) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for (ci, class) in mg.classes.iter().enumerate() {
        if class.terminal {
            continue;
        }
        let mut seen = BoxSet::empty(bm.grid());
        let mut queue = VecDeque::new();
        let mut hits = Vec::new();
        for &b in &class.boxes {
            seen.insert(b);
        }
        for &b in &class.boxes {
            for j in 0..bm.degree(b) {
                let s = bm.successor(b, j);
                if seen.insert(s) {
                    queue.push_back(s);
                }
            }
        }
        while let Some(b) = queue.pop_front() {
            match mg.class_of(b) {
                Some(k) => hits.push(k),
                None => {
                    for j in 0..bm.degree(b) {
                        let s = bm.successor(b, j);
                        if seen.insert(s) {
                            queue.push_back(s);
                        }
                    }
                }
            }
        }
        hits.sort_unstable();
        hits.dedup();
        edges.extend(hits.into_iter().map(|k| (ci, k)));
    }
    edges
}

/// Box sets of the terminal classes.
pub fn quasi_attractors(mg: &MorseGraph) -> Vec<BoxSet> {
    let grid = super::BoxGrid::new(mg.n as u64).expect("valid grid");
    mg.terminal_classes().map(|(_, c)| BoxSet::from_indices(grid, c.boxes.iter().copied())).collect()
}

/// Forward closure of `class`, rejected when it reaches boxes of a
/// nontrivial class outside `class`.
pub fn trapping_neighborhood(bm: &BoxMap, mg: &MorseGraph, class: &BoxSet) -> Result<BoxSet, BoxError> {
    let mut u = class.clone();
    let mut queue: VecDeque<u32> = class.iter().collect();
    while let Some(b) = queue.pop_front() {
        for j in 0..bm.degree(b) {
            let s = bm.successor(b, j);
            if u.insert(s) {
                queue.push_back(s);
            }
        }
    }
    let foreign = u.iter().filter(|&b| !class.contains(b) && !mg.is_transient(b)).count();
    if foreign > 0 {
        return Err(BoxError::NotTerminal(foreign));
    }
    Ok(u)
}

/// Every edge out of `set` stays in `set`.
pub fn is_successor_closed(bm: &BoxMap, set: &BoxSet) -> bool {
    let members: Vec<u32> = set.iter().collect();
    members.par_iter().all(|&b| (0..bm.degree(b)).all(|j| set.contains(bm.successor(b, j))))
}

/// Boxes of nontrivial classes that return to themselves within their class,
/// checked by BFS from `samples` random members.
pub fn spot_check_cycles(bm: &BoxMap, mg: &MorseGraph, samples: usize, rng: &mut impl Rng) -> bool {
    for class in &mg.classes {
        for _ in 0..samples {
            let start = class.boxes[rng.gen_range(0..class.boxes.len())];
            let mut seen = BoxSet::empty(bm.grid());
            let mut queue = VecDeque::from([start]);
            let mut back = false;
            'bfs: while let Some(b) = queue.pop_front() {
                for j in 0..bm.degree(b) {
                    let s = bm.successor(b, j);
                    if s == start {
                        back = true;
                        break 'bfs;
                    }
                    if mg.component[s as usize] == class.component && seen.insert(s) {
                        queue.push_back(s);
                    }
                }
            }
            if !back {
                return false;
            }
        }
    }
    true
}
