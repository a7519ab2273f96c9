//! Regular belief meshes over the hidden coordinate of a mixed-observable model.

use std::io;

use posmdp::format::fmt_f64;
use posmdp::model::MixedObservable;
use posmdp::{Belief, PosmdpModel, ValueFunction};

/// Every point of the `dim`-simplex lattice with spacing `1/resolution`, in
/// lexicographic order of the integer coordinates (first coordinate descending).
pub fn simplex_lattice(dim: usize, resolution: usize) -> Vec<Vec<f64>> {
    fn fill(prefix: &mut Vec<usize>, remaining: usize, slots: usize, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=remaining).rev() {
            prefix.push(k);
            fill(prefix, remaining - k, slots - 1, out);
            prefix.pop();
        }
    }
    assert!(dim >= 1 && resolution >= 1);
    let mut counts = Vec::new();
    fill(&mut Vec::with_capacity(dim), resolution, dim, &mut counts);
    let r = resolution as f64;
    counts
        .into_iter()
        .map(|c| c.into_iter().map(|k| k as f64 / r).collect())
        .collect()
}

/// One mesh row: observable index, hidden-state belief, chosen action and value.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshPoint {
    pub observable: usize,
    pub hidden: Vec<f64>,
    pub action: usize,
    pub value: f64,
}

pub fn mesh_points(model: &PosmdpModel, factors: &MixedObservable, v: &ValueFunction, resolution: usize) -> Vec<MeshPoint> {
    let h = factors.hidden.len();
    let lattice = simplex_lattice(h, resolution);
    let mut out = Vec::with_capacity(factors.observable.len() * lattice.len());
    for observable in 0..factors.observable.len() {
        for hidden in &lattice {
            let mut p = vec![0.0; model.num_states()];
            for (i, &x) in hidden.iter().enumerate() {
                p[factors.state_index(observable, i)] = x;
            }
            let xi = Belief::new_unscaled(p).expect("lattice points lie on the simplex");
            out.push(MeshPoint {
                observable,
                hidden: hidden.clone(),
                action: v.action_at(&xi),
                value: v.value_at(&xi),
            });
        }
    }
    out
}

/// CSV with header `observable,belief_1..belief_k,action,value`.
pub fn write_mesh<W: io::Write>(
    model: &PosmdpModel,
    factors: &MixedObservable,
    points: &[MeshPoint],
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["observable".to_string()];
    header.extend((1..=factors.hidden.len()).map(|k| format!("belief_{k}")));
    header.extend(["action".to_string(), "value".to_string()]);
    w.write_record(&header)?;
    for p in points {
        let mut row = vec![factors.observable[p.observable].clone()];
        row.extend(p.hidden.iter().map(|&x| fmt_f64(x)));
        row.push(model.action_names()[p.action].clone());
        row.push(fmt_f64(p.value));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
