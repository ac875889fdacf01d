//! Kesten trees (critical Poisson Galton–Watson trees with an infinite
//! spine of special nodes), their two position labelings, and the backward
//! construction of the Palm version.

use std::collections::VecDeque;
use std::io::{self, Write};

use serde::Serialize;

use crate::cluster::{simulate_family_until, PointConfiguration};
use crate::distributions::DisplacementSpec;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Normal,
    Special,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenealogyNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub kind: NodeKind,
    pub position: f64,
    pub depth: usize,
    /// Offspring count drawn for this node, `None` if it was never expanded.
    pub offspring: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct KestenTree {
    /// Nodes in creation order; parents precede their children.
    pub nodes: Vec<GenealogyNode>,
    /// Special node ids from the root down.
    pub spine: Vec<usize>,
    pub budget_used: usize,
    /// Some drawn child could not be stored.
    pub truncated: bool,
}

impl KestenTree {
    pub fn root(&self) -> &GenealogyNode {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn spine_positions(&self) -> Vec<f64> {
        self.spine.iter().map(|&i| self.nodes[i].position).collect()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.position).collect()
    }

    /// One node per line: `id,parent,kind,position` (empty parent for the root).
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "id,parent,kind,position")?;
        for n in &self.nodes {
            let parent = n.parent.map(|p| p.to_string()).unwrap_or_default();
            let kind = match n.kind {
                NodeKind::Normal => "normal",
                NodeKind::Special => "special",
            };
            writeln!(out, "{},{},{},{:.16e}", n.id, parent, kind, n.position)?;
        }
        Ok(())
    }
}

struct Grower<'a> {
    tree: KestenTree,
    budget: usize,
    rng: &'a mut RngStream,
}

impl Grower<'_> {
    /// Draws and stores the children of `id`; returns the stored child ids,
    /// or `None` if the budget ran out.
    fn expand(&mut self, id: usize) -> Option<Vec<usize>> {
        let kind = self.tree.nodes[id].kind;
        let depth = self.tree.nodes[id].depth;
        let mut k = self.rng.poisson(1.0);
        let special_slot = if kind == NodeKind::Special {
            k += 1;
            Some(self.rng.below(k as usize))
        } else {
            None
        };
        self.tree.nodes[id].offspring = Some(k);
        let mut children = Vec::with_capacity(k as usize);
        for slot in 0..k as usize {
            if self.tree.nodes.len() >= self.budget {
                self.tree.truncated = true;
                return None;
            }
            let child = self.tree.nodes.len();
            let kind = if special_slot == Some(slot) {
                self.tree.spine.push(child);
                NodeKind::Special
            } else {
                NodeKind::Normal
            };
            self.tree.nodes.push(GenealogyNode {
                id: child,
                parent: Some(id),
                kind,
                position: 0.0,
                depth: depth + 1,
                offspring: None,
            });
            children.push(child);
        }
        Some(children)
    }
}

fn new_tree() -> KestenTree {
    KestenTree {
        nodes: vec![GenealogyNode {
            id: 0,
            parent: None,
            kind: NodeKind::Special,
            position: 0.0,
            depth: 0,
            offspring: None,
        }],
        spine: vec![0],
        budget_used: 1,
        truncated: false,
    }
}

/// Breadth-first Kesten tree with at most `node_budget` nodes. Normal nodes
/// have Pois(1) children; special nodes have 1 + Pois(1) children, one of
/// them special, chosen uniformly.
pub fn grow_kesten(node_budget: usize, rng: &mut RngStream) -> Result<KestenTree> {
    grow(node_budget, None, rng)
}

/// Like [`grow_kesten`], but the spine is first extended to `spine_depth`
/// (with the sibling slots of every spine node), and the remaining budget
/// fills the normal subtrees breadth-first.
pub fn grow_kesten_spine_first(node_budget: usize, spine_depth: usize, rng: &mut RngStream) -> Result<KestenTree> {
    grow(node_budget, Some(spine_depth), rng)
}

fn grow(node_budget: usize, spine_depth: Option<usize>, rng: &mut RngStream) -> Result<KestenTree> {
    if node_budget == 0 {
        return Err(Error::invalid("node_budget", "must be at least 1"));
    }
    let mut g = Grower {
        tree: new_tree(),
        budget: node_budget,
        rng,
    };
    let mut queue = VecDeque::new();
    match spine_depth {
        None => queue.push_back(0),
        Some(d) => {
            let mut tip = 0;
            'spine: for _ in 0..d {
                let Some(children) = g.expand(tip) else {
                    break 'spine;
                };
                for c in children {
                    if g.tree.nodes[c].kind == NodeKind::Special {
                        tip = c;
                    } else {
                        queue.push_back(c);
                    }
                }
            }
        }
    }
    while let Some(id) = queue.pop_front() {
        if g.tree.truncated {
            break;
        }
        if spine_depth.is_some() && g.tree.nodes[id].kind == NodeKind::Special {
            continue;
        }
        match g.expand(id) {
            Some(children) => queue.extend(children),
            None => break,
        }
    }
    g.tree.budget_used = g.tree.nodes.len();
    Ok(g.tree)
}

/// Forward labeling: the root sits at 0, normal nodes are displaced from
/// their parent by `F1`, special nodes by `F2`.
pub fn label_renewal(tree: &KestenTree, f1: &DisplacementSpec, f2: &DisplacementSpec, rng: &mut RngStream) -> KestenTree {
    let mut out = tree.clone();
    for i in 1..out.nodes.len() {
        let p = out.nodes[i].parent.expect("non-root node has a parent");
        let step = match out.nodes[i].kind {
            NodeKind::Normal => f1.sample(rng),
            NodeKind::Special => f2.sample(rng),
        };
        out.nodes[i].position = out.nodes[p].position + step;
    }
    out
}

/// Backward labeling: normal nodes move right of their parent, special
/// nodes (ancestors of the root) move left, all steps drawn from `F`.
pub fn label_backward(tree: &KestenTree, f: &DisplacementSpec, rng: &mut RngStream) -> KestenTree {
    let mut out = tree.clone();
    for i in 1..out.nodes.len() {
        let p = out.nodes[i].parent.expect("non-root node has a parent");
        let step = f.sample(rng);
        out.nodes[i].position = match out.nodes[i].kind {
            NodeKind::Normal => out.nodes[p].position + step,
            NodeKind::Special => out.nodes[p].position - step,
        };
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BackwardPalmSpec {
    #[serde(skip)]
    pub f: DisplacementSpec,
    /// Number of ancestors generated behind the point at 0.
    pub spine_depth: usize,
    /// Ancestors left of `−spine_reach` are not generated.
    pub spine_reach: f64,
    pub family_budget: usize,
    pub window: (f64, f64),
}

impl BackwardPalmSpec {
    pub fn new(f: DisplacementSpec, spine_depth: usize, window: (f64, f64)) -> Self {
        Self {
            f,
            spine_depth,
            spine_reach: f64::INFINITY,
            family_budget: 1_000_000,
            window,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PalmRun {
    #[serde(skip)]
    pub points: PointConfiguration,
    /// Positions of 0 and its generated ancestors.
    pub spine: Vec<f64>,
    pub censored_families: usize,
}

/// Places a point at 0, ancestors at `−X₁, −X₁ − X₂, …` and attaches an
/// independent critical family to each; returns the superposition inside
/// the window. Family points right of the window are never generated.
pub fn backward_palm_simulate(spec: &BackwardPalmSpec, rng: &mut RngStream) -> Result<PalmRun> {
    let (lo, hi) = spec.window;
    if !(hi >= lo) {
        return Err(Error::invalid("window", "needs lo <= hi"));
    }
    if spec.family_budget == 0 {
        return Err(Error::invalid("family_budget", "must be at least 1"));
    }
    let mut spine = vec![0.0];
    let mut pos = 0.0;
    for _ in 0..spec.spine_depth {
        pos -= spec.f.sample(rng);
        if pos < -spec.spine_reach {
            break;
        }
        spine.push(pos);
    }
    let mut points = Vec::new();
    let mut censored = 0;
    for &s in &spine {
        let fam = simulate_family_until(&spec.f, 1.0, spec.family_budget, hi - s, rng);
        censored += usize::from(fam.censored);
        points.extend(fam.points.iter().map(|x| x + s).filter(|&x| x >= lo && x <= hi));
    }
    Ok(PalmRun {
        points: PointConfiguration::from_points(points, lo, hi, 0.0),
        spine,
        censored_families: censored,
    })
}
