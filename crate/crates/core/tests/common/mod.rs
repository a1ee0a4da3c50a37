//! Shared oracles for the integration suites. Everything here stays
//! independent of the library's implementation paths: brute-force pair
//! enumeration for adjacency, Floyd-Warshall for distances, plain
//! logistic regression for separability pre-checks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tskit_core::graph::GateGraph;
use tskit_core::netlist::Netlist;
use tskit_core::scalar::Scalar;

// ---------------------------------------------------------------------
// Random structural-netlist sources for parser/graph checks
// ---------------------------------------------------------------------

pub struct SourceOptions {
    pub gates: usize,
    pub buses: bool,
    pub escaped: bool,
    pub positional: bool,
}

/// Library profile matching everything [`random_netlist_source`] emits.
pub fn oracle_profile_text() -> &'static str {
    "INV*: A=in, Y=out, family=INV\n\
     NAND*: A=in, B=in, Y=out, family=NAND\n\
     AND*: A=in, B=in, Y=out, family=AND\n\
     OR*: A=in, B=in, Y=out, family=OR\n\
     DFF*: D=in, CLK=in, Q=out, family=DFF\n\
     PINV: A=in, Y=out, family=INV\n\
     PNAND: A=in, B=in, Y=out, family=NAND\n"
}

/// Generates a structural module exercising scalar wires and optionally
/// buses, escaped identifiers and positional connections.
pub fn random_netlist_source(name: &str, seed: u64, opts: &SourceOptions) -> String {
    use std::fmt::Write as _;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pi = rng.random_range(2..5usize);
    let mut refs: Vec<String> = (0..n_pi).map(|i| format!("a{i}")).collect();
    let mut body = String::new();
    let mut wires: Vec<String> = Vec::new();

    if opts.buses {
        let _ = writeln!(body, "  wire [3:0] bus0;");
        for k in 0..4 {
            refs.push(format!("bus0[{k}]"));
        }
        // drive the bus bits from the inputs
        for k in 0..4 {
            let src = refs[k % n_pi].clone();
            let _ = writeln!(body, "  INVX1 busdrv{k}(.A({src}),.Y(bus0[{k}]));");
        }
    }
    if opts.escaped {
        // escaped identifier: backslash prefix, terminated by whitespace
        let esc = "\\oddname$[5] ";
        let _ = writeln!(body, "  wire {esc};");
        let src = refs[0].clone();
        let _ = writeln!(body, "  INVX1 escdrv(.A({src}),.Y({esc}));");
        refs.push(esc.to_string());
    }

    let pick = |rng: &mut ChaCha8Rng, refs: &[String]| -> String {
        let window = refs.len().min(12);
        refs[refs.len() - 1 - rng.random_range(0..window)].clone()
    };
    for i in 0..opts.gates {
        let out = format!("w{i}");
        wires.push(out.clone());
        let a = pick(&mut rng, &refs);
        let b = pick(&mut rng, &refs);
        match rng.random_range(0..5) {
            0 => {
                let _ = writeln!(body, "  INVX1 g{i}(.A({a}),.Y({out}));");
            }
            1 => {
                let _ = writeln!(body, "  NAND2X1 g{i}(.A({a}),.B({b}),.Y({out}));");
            }
            2 => {
                let _ = writeln!(body, "  AND2X1 g{i}(.A({a}),.B({b}),.Y({out}));");
            }
            3 if opts.positional => {
                let _ = writeln!(body, "  PNAND g{i}({a}, {b}, {out});");
            }
            _ => {
                let _ = writeln!(body, "  OR2X1 g{i}(.A({a}),.B({b}),.Y({out}));");
            }
        }
        refs.push(out);
    }

    let mut text = String::new();
    let pis: Vec<String> = (0..n_pi).map(|i| format!("a{i}")).collect();
    let _ = writeln!(text, "module {name}({}, y0);", pis.join(", "));
    for p in &pis {
        let _ = writeln!(text, "  input {p};");
    }
    let _ = writeln!(text, "  output y0;");
    for w in &wires {
        let _ = writeln!(text, "  wire {w};");
    }
    text.push_str(&body);
    let last = format!("w{}", opts.gates - 1);
    let _ = writeln!(text, "  INVX1 podrv(.A({last}),.Y(y0));");
    let _ = writeln!(text, "endmodule");
    text
}

// ---------------------------------------------------------------------
// Brute-force adjacency + distance oracles
// ---------------------------------------------------------------------

/// Driver-sink pair enumeration straight over the pin lists: cells u, v
/// are adjacent iff some net is an output of one and an input of the
/// other.
pub fn brute_force_edges(netlist: &Netlist) -> Vec<(usize, usize)> {
    let n = netlist.cells.len();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let drives = |a: usize, b: usize| {
                netlist.cells[a].output_pins.iter().any(|(_, out)| {
                    netlist.cells[b].input_pins.iter().any(|(_, inp)| inp == out)
                })
            };
            if drives(u, v) || drives(v, u) {
                edges.push((u, v));
            }
        }
    }
    edges
}

/// Floyd-Warshall hop counts over an explicit edge list.
pub fn all_pairs_hops(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    const INF: usize = usize::MAX / 4;
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(u, v) in edges {
        d[u][v] = 1;
        d[v][u] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k].saturating_add(d[k][j]);
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Oracle for the PI/PO distance feature: 1 + min hops to any gate that
/// touches a port net, 0 when unreachable.
pub fn oracle_port_distance(
    netlist: &Netlist,
    hops: &[Vec<usize>],
    port_nets: &std::collections::HashSet<usize>,
) -> Vec<usize> {
    const INF: usize = usize::MAX / 4;
    let n = netlist.cells.len();
    let touching: Vec<usize> = (0..n)
        .filter(|&ci| {
            netlist.cells[ci]
                .input_pins
                .iter()
                .chain(&netlist.cells[ci].output_pins)
                .any(|(_, net)| port_nets.contains(net))
        })
        .collect();
    (0..n)
        .map(|u| {
            let best = touching.iter().map(|&t| hops[u][t]).min().unwrap_or(INF);
            if best >= INF {
                0
            } else {
                best + 1
            }
        })
        .collect()
}

// ---------------------------------------------------------------------
// Logistic-regression separability oracle
// ---------------------------------------------------------------------

/// Plain batch-gradient logistic regression on raw feature rows.
pub struct Logistic {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Logistic {
    pub fn fit<T: Scalar>(graph: &GateGraph<T>, nodes: &[usize], iterations: usize) -> Self {
        let d = graph.features().ncols();
        let mut weights = vec![0.0f64; d];
        let mut bias = 0.0f64;
        let n = nodes.len().max(1) as f64;
        // class weighting keeps the tiny HT class from being ignored
        let positives = nodes.iter().filter(|&&u| graph.labels()[u]).count().max(1) as f64;
        let negatives = (nodes.len() as f64 - positives).max(1.0);
        let w_pos = n / (2.0 * positives);
        let w_neg = n / (2.0 * negatives);
        for _ in 0..iterations {
            let mut gw = vec![0.0f64; d];
            let mut gb = 0.0f64;
            for &u in nodes {
                let z: f64 = (0..d)
                    .map(|c| weights[c] * graph.features()[[u, c]].to_f64_lossy())
                    .sum::<f64>()
                    + bias;
                let p = 1.0 / (1.0 + (-z).exp());
                let y = f64::from(u8::from(graph.labels()[u]));
                let err = (p - y) * if graph.labels()[u] { w_pos } else { w_neg };
                for (c, g) in gw.iter_mut().enumerate() {
                    *g += err * graph.features()[[u, c]].to_f64_lossy();
                }
                gb += err;
            }
            for c in 0..d {
                weights[c] -= 0.5 * gw[c] / n;
            }
            bias -= 0.5 * gb / n;
        }
        Logistic { weights, bias }
    }

    pub fn score<T: Scalar>(&self, graph: &GateGraph<T>, u: usize) -> f64 {
        let z: f64 = (0..self.weights.len())
            .map(|c| self.weights[c] * graph.features()[[u, c]].to_f64_lossy())
            .sum::<f64>()
            + self.bias;
        1.0 / (1.0 + (-z).exp())
    }

    /// Balanced accuracy of the 0.5-threshold decision over `nodes`.
    pub fn balanced_accuracy<T: Scalar>(&self, graph: &GateGraph<T>, nodes: &[usize]) -> f64 {
        let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
        for &u in nodes {
            let flag = self.score(graph, u) >= 0.5;
            match (flag, graph.labels()[u]) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        let tpr = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
        let tnr = if tn + fp > 0 { tn as f64 / (tn + fp) as f64 } else { 0.0 };
        (tpr + tnr) / 2.0
    }
}
