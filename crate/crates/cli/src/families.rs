//! Seeded generators for the three benchmark families: patrol, wholesale,
//! and packets. Each generator emits a set of component files plus a diagram
//! file wiring them together, deterministically from the seed.

use std::collections::BTreeMap;

use compmdp_core::expr::{Bindings, DiagramExpr, WireSpec};
use compmdp_core::model::{OpenMdp, RoMdp, Row, Target};
use compmdp_core::randgen::SplitMix64;

use crate::dsl::{print_component, print_diagram, DiagramFile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Family {
    Patrol,
    Wholesale,
    Packets,
}

/// Diagram-interface level: how many alias bindings each logical component
/// gets. Lower interface sharing means more aliases and more per-component
/// solves, with identical results.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum DiLevel {
    High,
    Mid,
    Low,
}

impl DiLevel {
    pub fn aliases(self) -> usize {
        match self {
            DiLevel::High => 1,
            DiLevel::Mid => 2,
            DiLevel::Low => 3,
        }
    }
}

/// Freeze mode: whether the packets family wraps its lower chain layer in
/// `freeze(...)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum FzMode {
    None,
    Int,
}

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub family: Family,
    pub sizes: Vec<usize>,
    pub di: DiLevel,
    pub fz: FzMode,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct GenOutput {
    /// File name and contents pairs; the diagram file is last.
    pub files: Vec<(String, String)>,
    /// Name of the diagram file within `files`.
    pub diagram: String,
}

pub fn default_sizes(family: Family) -> Vec<usize> {
    match family {
        Family::Patrol => vec![4, 3, 2, 3],
        Family::Wholesale => vec![3, 2, 2, 2],
        Family::Packets => vec![100, 50],
    }
}

pub fn generate(cfg: &GenConfig) -> Result<GenOutput, String> {
    if cfg.fz == FzMode::Int && cfg.family != Family::Packets {
        return Err("--fz int applies only to the packets family".into());
    }
    let sizes = if cfg.sizes.is_empty() { default_sizes(cfg.family) } else { cfg.sizes.clone() };
    match cfg.family {
        Family::Patrol => patrol(cfg, &sizes),
        Family::Wholesale => wholesale(cfg, &sizes),
        Family::Packets => packets(cfg, &sizes),
    }
}

fn want_sizes(sizes: &[usize], arity: usize, what: &str) -> Result<(), String> {
    if sizes.len() != arity {
        return Err(format!("expected {arity} sizes ({what}), got {}", sizes.len()));
    }
    if sizes.iter().any(|&s| s == 0) {
        return Err(format!("sizes must be positive ({what})"));
    }
    Ok(())
}

fn pos(q: &str) -> Target {
    Target::Position(q.into())
}

fn ex(j: usize) -> Target {
    Target::Exit(j)
}

/// A reward with two decimal places in `[lo, hi)`, so it survives printing
/// and reparsing bit for bit.
fn dec2(rng: &mut SplitMix64, lo: f64, hi: f64) -> f64 {
    let x = lo + rng.next_f64() * (hi - lo);
    (x * 100.0).floor() / 100.0
}

fn component(
    entrances: usize,
    exits: usize,
    actions: &[&str],
    positions: &[(&str, f64)],
    entry: &[Target],
    rows: &[(&str, &str, &[(Target, f64)])],
) -> OpenMdp {
    let mut trans = BTreeMap::new();
    for (q, a, entries) in rows {
        let mut row = Row::new();
        for (t, p) in entries.iter() {
            *row.entry(t.clone()).or_insert(0.0) += p;
        }
        trans.insert((q.to_string(), a.to_string()), row);
    }
    let body = RoMdp::new(
        entrances,
        exits,
        actions.iter().map(|a| a.to_string()).collect(),
        positions.iter().map(|(q, _)| q.to_string()).collect(),
        positions.iter().map(|(q, r)| (q.to_string(), *r)).collect(),
        entry.to_vec(),
        trans,
    );
    let report = body.validate();
    assert!(report.is_ok(), "generated component invalid: {:?}", report.violations());
    OpenMdp::from_rightward(body)
}

/// Accumulates component files and diagram bindings, duplicating every
/// logical binding into `aliases` copies and rotating uses across them so
/// each alias is exercised.
struct Builder {
    aliases: usize,
    files: Vec<(String, String)>,
    bindings: Bindings,
    alias_names: BTreeMap<String, Vec<String>>,
    counters: BTreeMap<String, usize>,
}

impl Builder {
    fn new(aliases: usize) -> Builder {
        Builder {
            aliases,
            files: Vec::new(),
            bindings: Bindings::new(),
            alias_names: BTreeMap::new(),
            counters: BTreeMap::new(),
        }
    }

    fn names_for(&self, name: &str) -> Vec<String> {
        (0..self.aliases)
            .map(|i| if i == 0 { name.to_string() } else { format!("{name}_{}", i + 1) })
            .collect()
    }

    /// Writes a component file and binds it (and its aliases) via `load`.
    fn prim(&mut self, name: &str, model: &OpenMdp) {
        let file = format!("{name}.omdp");
        self.files.push((file.clone(), print_component(name, model)));
        let names = self.names_for(name);
        for alias in &names {
            self.bindings.define(alias, DiagramExpr::prim(&file, model.clone()));
        }
        self.alias_names.insert(name.into(), names);
    }

    /// Binds a derived expression under `name`, materializing each alias by
    /// rerunning `body` so rotation spreads uses across earlier aliases.
    fn define(&mut self, name: &str, mut body: impl FnMut(&mut Builder) -> DiagramExpr) {
        let names = self.names_for(name);
        for alias in &names {
            let expr = body(self);
            self.bindings.define(alias, expr);
        }
        self.alias_names.insert(name.into(), names);
    }

    /// A rotated variable reference to one alias of `name`.
    fn use_of(&mut self, name: &str) -> DiagramExpr {
        let k = self.alias_names[name].len();
        let c = self.counters.entry(name.into()).or_insert(0);
        let idx = *c % k;
        *c += 1;
        DiagramExpr::var(&self.alias_names[name][idx])
    }

    /// `child ; child ; ...` with `count` rotated uses.
    fn chain(&mut self, child: &str, count: usize) -> DiagramExpr {
        let mut e = self.use_of(child);
        for _ in 1..count {
            e = DiagramExpr::seq(e, self.use_of(child));
        }
        e
    }

    fn finish(mut self, family: Family, top: DiagramExpr, entrance: usize, exit: usize) -> GenOutput {
        let file = DiagramFile { bindings: self.bindings, expr: top, entrance, exit };
        let diagram = format!("{}.diagram", family_name(family));
        self.files.push((diagram.clone(), print_diagram(&file)));
        GenOutput { files: self.files, diagram }
    }
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::Patrol => "patrol",
        Family::Wholesale => "wholesale",
        Family::Packets => "packets",
    }
}

fn id1() -> DiagramExpr {
    DiagramExpr::Wire(WireSpec::Identity(1))
}

/// Patrol: a guard walks task chains grouped into rooms, rooms into floors
/// behind a hub with a retry loop, floors into buildings. Single action
/// everywhere; the hub branches probabilistically between redoing the floor
/// and moving on.
fn patrol(cfg: &GenConfig, sizes: &[usize]) -> Result<GenOutput, String> {
    want_sizes(sizes, 4, "tasks-per-room, rooms-per-floor, floors-per-building, buildings")?;
    let (tpr, rpf, fpb, buildings) = (sizes[0], sizes[1], sizes[2], sizes[3]);
    let mut rng = SplitMix64::new(cfg.seed);
    let task_reward = dec2(&mut rng, 2.0, 6.0);
    let hub_reward = dec2(&mut rng, 0.1, 0.6);

    let task = component(
        1,
        1,
        &["move"],
        &[("t", task_reward)],
        &[pos("t")],
        &[("t", "move", &[(pos("t"), 0.2), (ex(1), 0.8)])],
    );
    let hub = component(
        2,
        2,
        &["move"],
        &[("h", hub_reward)],
        &[pos("h"), pos("h")],
        &[("h", "move", &[(pos("h"), 0.05), (ex(1), 0.7), (ex(2), 0.25)])],
    );

    let mut b = Builder::new(cfg.di.aliases());
    b.prim("task", &task);
    b.define("room", |b| b.chain("task", tpr));
    b.define("rooms", |b| b.chain("room", rpf));
    b.prim("floorhub", &hub);
    b.define("floor", |b| {
        let loop_back = DiagramExpr::sum(b.use_of("rooms"), id1());
        DiagramExpr::trace(1, DiagramExpr::seq(b.use_of("floorhub"), loop_back))
    });
    b.define("building", |b| b.chain("floor", fpb));
    let top = b.chain("building", buildings);
    Ok(b.finish(Family::Patrol, top, 1, 1))
}

/// Wholesale: suppliers feed depots through merge points, depots retry via a
/// hub loop, a two-action router splits each region between a short and a
/// long depot line, and goods cross market chains. Supplier rows leak into a
/// rowless dead position, so some schedulers lose mass.
fn wholesale(cfg: &GenConfig, sizes: &[usize]) -> Result<GenOutput, String> {
    want_sizes(sizes, 4, "suppliers-per-depot, depots-per-line, regions, markets-per-region")?;
    let (spd, dpl, regions, mpr) = (sizes[0], sizes[1], sizes[2], sizes[3]);
    let mut rng = SplitMix64::new(cfg.seed);
    let r_sup = dec2(&mut rng, 1.0, 4.0);
    let r_mer = dec2(&mut rng, 0.2, 1.0);
    let r_hub = dec2(&mut rng, 0.3, 1.2);
    let r_rout = dec2(&mut rng, 0.5, 2.0);
    let r_mkt = dec2(&mut rng, 1.0, 3.0);
    let loss = [0.02, 0.05][rng.below(2)];

    let supplier = component(
        1,
        2,
        &["bulk", "express"],
        &[("r", r_sup), ("d", 0.0)],
        &[pos("r")],
        &[
            ("r", "bulk", &[(pos("r"), 0.1), (pos("d"), loss), (ex(1), 0.9 - loss)]),
            ("r", "express", &[(pos("r"), 0.25), (pos("d"), loss), (ex(2), 0.75 - loss)]),
        ],
    );
    let merge2 = component(
        2,
        1,
        &["go"],
        &[("m", r_mer)],
        &[pos("m"), pos("m")],
        &[("m", "go", &[(pos("m"), 0.15), (ex(1), 0.85)])],
    );
    let depothub = component(
        2,
        2,
        &["go"],
        &[("h", r_hub)],
        &[pos("h"), pos("h")],
        &[("h", "go", &[(pos("h"), 0.05), (ex(1), 0.55), (ex(2), 0.4)])],
    );
    let router = component(
        1,
        2,
        &["cheap", "fast"],
        &[("v", r_rout)],
        &[pos("v")],
        &[
            ("v", "cheap", &[(pos("v"), 0.1), (ex(1), 0.9)]),
            ("v", "fast", &[(pos("v"), 0.3), (ex(2), 0.7)]),
        ],
    );
    let market = component(
        1,
        1,
        &["go"],
        &[("k", r_mkt)],
        &[pos("k")],
        &[("k", "go", &[(pos("k"), 0.25), (ex(1), 0.75)])],
    );

    let mut b = Builder::new(cfg.di.aliases());
    b.prim("supplier", &supplier);
    b.prim("merge2", &merge2);
    b.define("supply", |b| DiagramExpr::seq(b.use_of("supplier"), b.use_of("merge2")));
    b.define("supplies", |b| b.chain("supply", spd));
    b.prim("depothub", &depothub);
    b.define("depot", |b| {
        let loop_back = DiagramExpr::sum(b.use_of("supplies"), id1());
        DiagramExpr::trace(1, DiagramExpr::seq(b.use_of("depothub"), loop_back))
    });
    b.define("shortline", |b| b.chain("depot", dpl));
    b.define("longline", |b| b.chain("depot", dpl + 1));
    b.prim("router", &router);
    b.define("region", |b| {
        let split = DiagramExpr::sum(b.use_of("shortline"), b.use_of("longline"));
        DiagramExpr::seq(DiagramExpr::seq(b.use_of("router"), split), b.use_of("merge2"))
    });
    b.prim("market", &market);
    b.define("markets", |b| b.chain("market", mpr));
    b.define("sector", |b| DiagramExpr::seq(b.use_of("region"), b.use_of("markets")));
    let top = b.chain("sector", regions);
    Ok(b.finish(Family::Wholesale, top, 1, 1))
}

/// Packets: each block routes a packet through a two-action header (standard
/// path straight to the relay, priority path through a delay stage), merges,
/// and crosses a long retransmission chain. Under `--fz int` the chain is
/// frozen, so upper layers see only its optimal summary.
fn packets(cfg: &GenConfig, sizes: &[usize]) -> Result<GenOutput, String> {
    want_sizes(sizes, 2, "chain-length, blocks")?;
    let (chain_len, blocks) = (sizes[0], sizes[1]);
    if chain_len < 2 {
        return Err("chain-length must be at least 2".into());
    }
    let mut rng = SplitMix64::new(cfg.seed);
    let variants = 2 + rng.below(4);

    let chain = {
        let names: Vec<String> = (0..chain_len).map(|i| format!("c{i}")).collect();
        let rewards: Vec<f64> =
            (0..chain_len).map(|_| dec2(&mut rng, 0.01, 0.2)).collect();
        let mut trans = BTreeMap::new();
        for i in 0..chain_len {
            let mut row = Row::new();
            if i + 1 < chain_len {
                row.insert(pos(&names[i + 1]), 0.97);
            } else {
                row.insert(ex(1), 0.97);
            }
            *row.entry(pos(&names[0])).or_insert(0.0) += 0.03;
            trans.insert((names[i].clone(), "send".to_string()), row);
        }
        let body = RoMdp::new(
            1,
            1,
            vec!["send".into()],
            names.clone(),
            names.iter().cloned().zip(rewards).collect(),
            vec![pos(&names[0])],
            trans,
        );
        assert!(body.validate().is_ok());
        OpenMdp::from_rightward(body)
    };

    let mut headers = Vec::new();
    let mut delays = Vec::new();
    for _ in 0..variants {
        let h_reward = dec2(&mut rng, 0.05, 0.5);
        let q = [0.1, 0.15, 0.2, 0.25][rng.below(4)];
        headers.push(component(
            1,
            2,
            &["std", "prio"],
            &[("h", h_reward)],
            &[pos("h")],
            &[
                ("h", "std", &[(pos("h"), q), (ex(1), 1.0 - q)]),
                ("h", "prio", &[(pos("h"), 0.2), (ex(2), 0.8)]),
            ],
        ));
        let d_reward = dec2(&mut rng, 0.5, 2.0);
        let s = [0.05, 0.1, 0.15][rng.below(3)];
        delays.push(component(
            1,
            1,
            &["wait"],
            &[("d", d_reward)],
            &[pos("d")],
            &[("d", "wait", &[(pos("d"), s), (ex(1), 1.0 - s)])],
        ));
    }
    let merge_reward = dec2(&mut rng, 0.01, 0.1);
    let merge = component(
        2,
        1,
        &["go"],
        &[("m", merge_reward)],
        &[pos("m"), pos("m")],
        &[("m", "go", &[(pos("m"), 0.05), (ex(1), 0.95)])],
    );
    let block_variant: Vec<usize> = (0..blocks).map(|_| rng.below(variants)).collect();

    let mut b = Builder::new(cfg.di.aliases());
    b.prim("chain", &chain);
    b.prim("merge", &merge);
    for v in 0..variants {
        b.prim(&format!("header{}", v + 1), &headers[v]);
        b.prim(&format!("delay{}", v + 1), &delays[v]);
    }
    for v in 0..variants {
        let frozen = cfg.fz == FzMode::Int;
        b.define(&format!("block{}", v + 1), |b| {
            let split = DiagramExpr::sum(id1(), b.use_of(&format!("delay{}", v + 1)));
            let routed = DiagramExpr::seq(DiagramExpr::seq(b.use_of(&format!("header{}", v + 1)), split), b.use_of("merge"));
            let lower = if frozen {
                DiagramExpr::freeze(b.use_of("chain"))
            } else {
                b.use_of("chain")
            };
            DiagramExpr::seq(routed, lower)
        });
    }
    let mut top = b.use_of(&format!("block{}", block_variant[0] + 1));
    for &v in &block_variant[1..] {
        top = DiagramExpr::seq(top, b.use_of(&format!("block{}", v + 1)));
    }
    Ok(b.finish(Family::Packets, top, 1, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use compmdp_core::semantics::{solve_query, EvalConfig};

    use crate::dsl::{parse_diagram, MapLoader};

    fn cfg(family: Family, di: DiLevel, fz: FzMode, seed: u64) -> GenConfig {
        GenConfig { family, sizes: Vec::new(), di, fz, seed }
    }

    fn reparse(out: &GenOutput) -> DiagramFile {
        let mut loader = MapLoader(BTreeMap::new());
        for (name, text) in &out.files {
            if name.ends_with(".omdp") {
                let def = crate::dsl::parse_component(text).unwrap();
                loader.0.insert(name.clone(), def.model);
            }
        }
        let diagram = &out.files.last().unwrap().1;
        parse_diagram(diagram, &mut loader).unwrap()
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&cfg(Family::Patrol, DiLevel::High, FzMode::None, 7)).unwrap();
        let b = generate(&cfg(Family::Patrol, DiLevel::High, FzMode::None, 7)).unwrap();
        let c = generate(&cfg(Family::Patrol, DiLevel::High, FzMode::None, 8)).unwrap();
        assert_eq!(a.files, b.files);
        assert_ne!(a.files, c.files);
    }

    #[test]
    fn di_levels_change_only_the_diagram() {
        let hi = generate(&cfg(Family::Wholesale, DiLevel::High, FzMode::None, 3)).unwrap();
        let mid = generate(&cfg(Family::Wholesale, DiLevel::Mid, FzMode::None, 3)).unwrap();
        for ((na, ta), (nb, tb)) in hi.files.iter().zip(&mid.files) {
            assert_eq!(na, nb);
            if na.ends_with(".omdp") {
                assert_eq!(ta, tb);
            }
        }
        let lets = |out: &GenOutput| {
            out.files.last().unwrap().1.lines().filter(|l| l.starts_with("let ")).count()
        };
        assert_eq!(lets(&mid), 2 * lets(&hi));
    }

    #[test]
    fn generated_files_reparse_and_solve() {
        for family in [Family::Patrol, Family::Wholesale, Family::Packets] {
            let mut sizes = match family {
                Family::Patrol => vec![2, 2, 2, 2],
                Family::Wholesale => vec![2, 1, 2, 1],
                Family::Packets => vec![5, 4],
            };
            let out = generate(&GenConfig {
                family,
                sizes: std::mem::take(&mut sizes),
                di: DiLevel::Low,
                fz: FzMode::None,
                seed: 11,
            })
            .unwrap();
            let file = reparse(&out);
            let (p, r, _, _) =
                solve_query(&file.expr, &file.bindings, EvalConfig::default(), 1, 1).unwrap();
            assert!(p > 0.0 && p <= 1.0 + 1e-12, "{family:?}: p={p}");
            assert!(r.is_finite() && r > 0.0, "{family:?}: r={r}");
        }
    }

    #[test]
    fn fz_int_only_for_packets() {
        let err = generate(&cfg(Family::Patrol, DiLevel::High, FzMode::Int, 1)).unwrap_err();
        assert!(err.contains("packets"));
        generate(&cfg(Family::Packets, DiLevel::High, FzMode::Int, 1)).unwrap();
    }

    #[test]
    fn fz_int_wraps_chain_in_freeze() {
        let out = generate(&cfg(Family::Packets, DiLevel::High, FzMode::Int, 5)).unwrap();
        let diagram = &out.files.last().unwrap().1;
        assert!(diagram.contains("freeze(chain)"));
        let plain = generate(&cfg(Family::Packets, DiLevel::High, FzMode::None, 5)).unwrap();
        assert!(!plain.files.last().unwrap().1.contains("freeze"));
        // Component files agree between the two modes.
        for ((na, ta), (nb, tb)) in out.files.iter().zip(&plain.files) {
            if na.ends_with(".omdp") {
                assert_eq!(na, nb);
                assert_eq!(ta, tb);
            }
        }
    }

    #[test]
    fn bad_sizes_are_rejected() {
        let mut c = cfg(Family::Patrol, DiLevel::High, FzMode::None, 1);
        c.sizes = vec![1, 2, 3];
        assert!(generate(&c).unwrap_err().contains("expected 4 sizes"));
        c.sizes = vec![1, 2, 3, 0];
        assert!(generate(&c).unwrap_err().contains("positive"));
        let mut p = cfg(Family::Packets, DiLevel::High, FzMode::None, 1);
        p.sizes = vec![1, 3];
        assert!(generate(&p).unwrap_err().contains("chain-length"));
    }
}
