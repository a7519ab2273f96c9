//! Built-in benchmark problems: the bus commute and the water-filter maintenance model.

use super::document::{
    BetaKernelDocument, BetaKernelRow, BinsDocument, KernelDocument, ModelDocument, ObservationsDocument,
    SojournRecord,
};
use super::{MixedObservable, ModelError, PosmdpModel, MODEL_FORMAT_VERSION};
use crate::distributions::SojournDistribution;

const BUS_STOPS: usize = 5;
const INTENSITIES: [&str; 3] = ["low", "medium", "high"];
/// Mean bus leg time from stop `s` to `s + 1`, per traffic intensity.
const BUS_LEG_MEANS: [[f64; 4]; 3] = [[5.0, 5.0, 5.0, 5.0], [5.0, 10.0, 10.0, 20.0], [10.0, 25.0, 25.0, 45.0]];
/// Bike time from stop `s` to the last stop.
const BIKE_TIMES: [f64; 4] = [30.0, 25.0, 20.0, 12.0];
/// Reset delay from the last stop back to stop 0; discounts the next trip by e^{-9.1}.
const RESET_TIME: f64 = 455.0;
const ARRIVAL_REWARD: f64 = 100.0;
const BUS_BETA: f64 = 0.02;

/// Reward parameterization for the bus problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BusRewards {
    /// Lump sum of 100 collected at the last stop; no rate reward.
    #[default]
    ArrivalBonus,
    /// Continuous cost of one unit per unit time; no lump sum.
    TimeCost,
}

/// The 15-state bus commute problem with the arrival-bonus rewards.
pub fn build_bus_problem() -> PosmdpModel {
    build_bus_problem_with(BusRewards::ArrivalBonus)
}

pub fn build_bus_problem_with(rewards: BusRewards) -> PosmdpModel {
    let ni = INTENSITIES.len();
    let ns = BUS_STOPS * ni;
    let idx = |stop: usize, i: usize| stop * ni + i;
    let (bus, bike) = (0, 1);
    let last = BUS_STOPS - 1;

    let states = (0..BUS_STOPS)
        .flat_map(|stop| INTENSITIES.iter().map(move |i| format!("stop{stop}-{i}")))
        .collect();
    let stops: Vec<String> = (0..BUS_STOPS).map(|stop| format!("stop{stop}")).collect();

    let mut transition = vec![vec![vec![0.0; ns]; 2]; ns];
    let mut sojourn = Vec::new();
    let mut push = |s: usize, a: usize, s_next: usize, dist: SojournDistribution| {
        sojourn.push(SojournRecord { s, a, s_next, dist });
    };
    for i in 0..ni {
        for stop in 0..last {
            let s = idx(stop, i);
            let mean = BUS_LEG_MEANS[i][stop];
            transition[s][bus][idx(stop + 1, i)] = 1.0;
            push(
                s,
                bus,
                idx(stop + 1, i),
                SojournDistribution::inverse_gaussian(mean, 10.0 * mean * mean).expect("valid leg"),
            );
            transition[s][bike][idx(last, i)] = 1.0;
            push(
                s,
                bike,
                idx(last, i),
                SojournDistribution::atom(BIKE_TIMES[stop]).expect("valid bike time"),
            );
        }
        let s = idx(last, i);
        for a in [bus, bike] {
            for i_next in 0..ni {
                transition[s][a][idx(0, i_next)] = 1.0 / 3.0;
                push(s, a, idx(0, i_next), SojournDistribution::atom(RESET_TIME).expect("valid reset"));
            }
        }
    }

    let identity: Vec<Vec<f64>> = (0..ns)
        .map(|s_next| (0..BUS_STOPS).map(|o| if s_next / ni == o { 1.0 } else { 0.0 }).collect())
        .collect();

    let (r1, r2) = match rewards {
        BusRewards::ArrivalBonus => {
            let r1 = (0..ns)
                .map(|s| vec![if s / ni == last { ARRIVAL_REWARD } else { 0.0 }; 2])
                .collect();
            (r1, vec![vec![vec![0.0; ns]; 2]; ns])
        }
        BusRewards::TimeCost => (vec![vec![0.0; 2]; ns], vec![vec![vec![-1.0; ns]; 2]; ns]),
    };

    let mut initial_belief = vec![0.0; ns];
    initial_belief[..ni].fill(1.0 / 3.0);

    let doc = ModelDocument {
        version: MODEL_FORMAT_VERSION,
        states,
        actions: vec!["bus".into(), "bike".into()],
        admissible: None,
        observations: ObservationsDocument::Names(stops.clone()),
        transition,
        sojourn,
        observation_kernel: KernelDocument::Dense(vec![identity.clone(), identity]),
        g0: None,
        r1,
        r2,
        beta: BUS_BETA,
        initial_belief,
        mixed_observable: Some(MixedObservable {
            observable: stops,
            hidden: INTENSITIES.iter().map(|s| s.to_string()).collect(),
        }),
        initial_value: None,
    };
    PosmdpModel::from_document(doc).expect("bus problem is well formed")
}

const FILTER_STATES: [&str; 4] = ["good", "acceptable", "poor", "awful"];
const FILTER_ACTIONS: [&str; 4] = ["nothing", "backwash", "dose", "replace"];
const DETERIORATE: [[f64; 4]; 4] = [
    [0.1043, 0.7413, 0.1493, 0.0051],
    [0.0, 0.1043, 0.7413, 0.1544],
    [0.0, 0.0, 0.1043, 0.8957],
    [0.0, 0.0, 0.0, 1.0],
];
const DOSE: [[f64; 4]; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [0.50, 0.50, 0.0, 0.0],
    [0.25, 0.70, 0.05, 0.0],
    [0.20, 0.55, 0.20, 0.05],
];
const REPLACE: [[f64; 4]; 4] = [[1.0, 0.0, 0.0, 0.0]; 4];
/// Fixed sojourn times for do-nothing, backwash and dose.
const FIXED_TIMES: [f64; 3] = [78.7433, 85.3052, 3.0];
const REPLACE_MEAN: f64 = 10.0;
const REPLACE_STD: f64 = 1.5;
/// Beta shapes `(phi, eta)` of the turbidity-ratio observation per action.
const TURBIDITY_SHAPES: [(f64, f64); 4] = [(2.0, 18.0), (6.0, 18.0), (18.0, 18.0), (18.0, 6.0)];
const ACTION_COSTS: [f64; 4] = [0.0, -100.0, -200.0, -500.0];
/// Reward rate by current state for do-nothing / backwash; dose and replace accrue -100.
const OPERATING_RATES: [f64; 4] = [500.0, 250.0, -300.0, -500.0];
const SERVICE_RATE: f64 = -100.0;
const MAINTENANCE_BETA: f64 = 0.01;
/// Constant initial α-vector used for this problem instead of the generic lower bound.
pub const MAINTENANCE_INITIAL_VALUE: f64 = -1e6;

/// The 4-state filter maintenance problem with the turbidity ratio discretized
/// into `observation_bins` evenly spaced points.
pub fn build_maintenance_problem(observation_bins: usize) -> Result<PosmdpModel, ModelError> {
    if observation_bins < 2 {
        return Err(ModelError::Invalid {
            path: "observation_bins".into(),
            message: format!("at least 2 bins are required, got {observation_bins}"),
        });
    }
    let ns = FILTER_STATES.len();
    let na = FILTER_ACTIONS.len();
    let matrices = [&DETERIORATE, &DETERIORATE, &DOSE, &REPLACE];

    let mut transition = vec![vec![vec![0.0; ns]; na]; ns];
    let mut sojourn = Vec::new();
    for s in 0..ns {
        for a in 0..na {
            for s_next in 0..ns {
                let p = matrices[a][s][s_next];
                transition[s][a][s_next] = p;
                if p > 0.0 {
                    let dist = match a {
                        3 => SojournDistribution::truncated_gaussian(REPLACE_MEAN, REPLACE_STD),
                        _ => SojournDistribution::atom(FIXED_TIMES[a]),
                    }
                    .expect("valid sojourn");
                    sojourn.push(SojournRecord { s, a, s_next, dist });
                }
            }
        }
    }

    let r1 = (0..ns).map(|_| ACTION_COSTS.to_vec()).collect();
    let r2 = (0..ns)
        .map(|s| {
            (0..na)
                .map(|a| {
                    let rate = if a < 2 { OPERATING_RATES[s] } else { SERVICE_RATE };
                    vec![rate; ns]
                })
                .collect()
        })
        .collect();

    let doc = ModelDocument {
        version: MODEL_FORMAT_VERSION,
        states: FILTER_STATES.iter().map(|s| s.to_string()).collect(),
        actions: FILTER_ACTIONS.iter().map(|s| s.to_string()).collect(),
        admissible: None,
        observations: ObservationsDocument::Bins(BinsDocument { bins: observation_bins }),
        transition,
        sojourn,
        observation_kernel: KernelDocument::Beta(BetaKernelDocument {
            beta: TURBIDITY_SHAPES
                .iter()
                .enumerate()
                .map(|(a, &(phi, eta))| BetaKernelRow { a, phi, eta })
                .collect(),
        }),
        g0: None,
        r1,
        r2,
        beta: MAINTENANCE_BETA,
        initial_belief: vec![1.0, 0.0, 0.0, 0.0],
        mixed_observable: None,
        initial_value: Some(MAINTENANCE_INITIAL_VALUE),
    };
    PosmdpModel::from_document(doc)
}
