//! The experiment catalog: names, parameter schemas and the mathematical
//! claim each experiment probes.

use std::sync::LazyLock;

use serde::Serialize;

use crate::config::{ExperimentConfig, ParamSpec, Params};
use crate::experiments as ex;
use crate::record::ReplicaOutput;

pub type Runner = fn(&Params, driftlab::RngStream) -> driftlab::Result<ReplicaOutput>;

#[derive(Serialize)]
pub struct Experiment {
    pub name: &'static str,
    /// The statement the experiment gives numerical evidence for.
    pub claim: &'static str,
    /// Name of the scalar reported per replica and aggregated in the summary.
    pub metric: &'static str,
    pub params: Vec<ParamSpec>,
    #[serde(skip)]
    pub run: Runner,
}

impl Experiment {
    /// A config with every parameter at its default.
    pub fn example_config(&self) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(self.name);
        for p in &self.params {
            c.parameters.insert(p.name.to_string(), p.default.clone());
        }
        c
    }
}

const DRIFTS: &[&str] = &["zero", "linear", "sqrt-cusp", "weierstrass", "fbm"];

fn drift_params() -> [ParamSpec; 2] {
    [
        ParamSpec::choice("drift", DRIFTS, "zero", "drift added to the Brownian path"),
        ParamSpec::float(
            "drift_param",
            0.0,
            1e3,
            1.0,
            "slope (linear), K (sqrt-cusp), exponent in (0, 1] (weierstrass) or Hurst index in (0, 1) (fbm)",
        ),
    ]
}

fn with_drift(mut params: Vec<ParamSpec>) -> Vec<ParamSpec> {
    params.extend(drift_params());
    params
}

pub static CATALOG: LazyLock<Vec<Experiment>> = LazyLock::new(|| {
    vec![
        Experiment {
            name: "green-closed-form",
            claim: "the Green kernel of transient Brownian motion is Gamma(d/2-1)/(2 pi^{d/2}) r^{2-d}",
            metric: "abs_difference",
            params: vec![
                ParamSpec::int("d", 3, 12, 3, "dimension"),
                ParamSpec::float("r", 1e-6, 1e6, 1.0, "distance |x - y|"),
            ],
            run: ex::green_closed_form,
        },
        Experiment {
            name: "green-sandwich",
            claim: "a Hölder(1/2) drift changes the (killed, if d = 2) Green kernel by bounded factors c1 <= G_f/G <= c2",
            metric: "c2_over_c1",
            params: vec![
                ParamSpec::int("d", 2, 8, 3, "dimension"),
                ParamSpec::float("scale", 0.0, 100.0, 1.0, "K in f(t) = K sqrt(t) e1"),
                ParamSpec::float("lambda", 0.0, 1e6, 0.0, "killing rate, 0 for none (required in d = 2)"),
                ParamSpec::float("r_min", 1e-6, 1e6, 0.01, "smallest radius"),
                ParamSpec::float("r_max", 1e-6, 1e6, 100.0, "largest radius"),
                ParamSpec::int("radii", 1, 200, 25, "number of log-spaced radii"),
            ],
            run: ex::green_sandwich,
        },
        Experiment {
            name: "riesz-capacity",
            claim: "capacity is the reciprocal of the minimal Riesz energy over probability measures on the set",
            metric: "capacity",
            params: vec![
                ParamSpec::choice("set", &["interval", "cantor", "square"], "cantor", "support family"),
                ParamSpec::int("level", 1, 11, 6, "points 2^level (interval), depth (cantor), 2^level per side (square, <= 5)"),
                ParamSpec::float("alpha", 1e-3, 10.0, 0.5, "Riesz exponent"),
            ],
            run: ex::riesz_capacity,
        },
        Experiment {
            name: "frostman-dimension",
            claim: "the Hausdorff dimension is the supremum of alpha with positive alpha-capacity",
            metric: "dimension",
            params: vec![
                ParamSpec::choice("set", &["interval", "cantor"], "cantor", "support family"),
                ParamSpec::int("level_lo", 1, 10, 3, "coarsest refinement level"),
                ParamSpec::int("level_hi", 3, 10, 8, "finest refinement level"),
                ParamSpec::list("alphas", 2, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.55, 0.6, 0.65, 0.7, 0.8, 0.9, 1.0, 1.1], "exponent grid"),
            ],
            run: ex::frostman_dimension,
        },
        Experiment {
            name: "hit-probability",
            claim: "B + f hits a set with probability comparable to B when f is Hölder(1/2)",
            metric: "estimate",
            params: with_drift(vec![
                ParamSpec::int("d", 2, 6, 3, "dimension"),
                ParamSpec::float("radius", 1e-6, 1e3, 0.5, "target ball radius (ball at the origin)"),
                ParamSpec::float("distance", 0.0, 1e3, 1.0, "start distance along e1"),
                ParamSpec::float("lambda", 0.0, 1e6, 0.0, "killing rate, 0 for none (required in d = 2)"),
                ParamSpec::int("trials", 1, 100_000_000, 10_000, "Monte Carlo trials"),
                ParamSpec::int("step_levels", 4, 30, 14, "smallest step 2^-step_levels"),
            ]),
            run: ex::hit_probability,
        },
        Experiment {
            name: "capacity-sandwich",
            claim: "Cap_M(A)/2 <= P_x0(B hits A) <= Cap_M(A) with the Martin kernel based at x0",
            metric: "estimate",
            params: vec![
                ParamSpec::int("d", 3, 6, 3, "dimension"),
                ParamSpec::float("radius", 1e-6, 1e3, 0.5, "target ball radius"),
                ParamSpec::float("distance", 1e-6, 1e3, 2.0, "distance of x0 from the ball's center"),
                ParamSpec::int("surface_points", 4, 4096, 1024, "support points of the discretized surface"),
                ParamSpec::int("trials", 1, 100_000_000, 100_000, "Monte Carlo trials"),
                ParamSpec::int("step_levels", 4, 30, 14, "smallest step 2^-step_levels"),
            ],
            run: ex::capacity_sandwich,
        },
        Experiment {
            name: "intersection-equivalence",
            claim: "hit(B + f)/hit(B) stays in a fixed interval [c1, c2] over all target sets",
            metric: "width",
            params: vec![
                ParamSpec::float("scale", 0.0, 100.0, 1.0, "K in f(t) = K sqrt(t) e1"),
                ParamSpec::int("targets", 1, 5, 5, "how many of the five reference dust clusters to use"),
                ParamSpec::int("trials", 1, 100_000_000, 20_000, "trials per process and target"),
                ParamSpec::int("step_levels", 4, 30, 14, "smallest step 2^-step_levels"),
            ],
            run: ex::intersection_equivalence,
        },
        Experiment {
            name: "recurrence",
            claim: "planar B + f with Hölder(1/2) f is neighbourhood recurrent; E T grows like log n",
            metric: "p_positive",
            params: with_drift(vec![
                ParamSpec::float("n", 2.0, 1e3, 2.0, "occupation window [n, n^2]"),
                ParamSpec::list("w", 2, &[0.0, 0.0], "starting point"),
                ParamSpec::int("trials", 1, 10_000_000, 20_000, "Monte Carlo trials"),
                ParamSpec::int("step_levels", 2, 24, 10, "smallest step 2^-step_levels"),
            ]),
            run: ex::recurrence,
        },
        Experiment {
            name: "boxcount-brownian-image",
            claim: "dim (B + f)[0, 1] = 2 for Brownian motion in d >= 2, and a drift cannot lower it",
            metric: "dimension",
            params: with_drift(vec![
                ParamSpec::int("d", 1, 4, 2, "dimension"),
                ParamSpec::int("levels", 10, 24, 18, "samples 2^levels + 1"),
            ]),
            run: ex::boxcount_image,
        },
        Experiment {
            name: "boxcount-brownian-graph",
            claim: "the graph of B + f has dimension at least 3/2 (d = 1) or 2 (d >= 2)",
            metric: "dimension",
            params: with_drift(vec![
                ParamSpec::int("d", 1, 3, 1, "dimension of the path"),
                ParamSpec::int("levels", 10, 24, 18, "samples 2^levels + 1"),
            ]),
            run: ex::boxcount_graph,
        },
        Experiment {
            name: "boxcount-fbm-image",
            claim: "the image of fractional Brownian motion with Hurst index alpha has dimension min(1/alpha, d)",
            metric: "dimension",
            params: vec![
                ParamSpec::float("alpha", 0.05, 0.95, 0.6, "Hurst index"),
                ParamSpec::int("d", 1, 4, 3, "dimension"),
                ParamSpec::int("levels", 10, 24, 18, "samples 2^levels + 1"),
            ],
            run: ex::boxcount_fbm,
        },
        Experiment {
            name: "cuzick",
            claim: "with f = (fBM_alpha, 0, 0) in d = 3 the image of B + f has dimension 3 - 2 alpha",
            metric: "dimension",
            params: vec![
                ParamSpec::float("alpha", 0.01, 0.5, 0.2, "Hurst index of the drift"),
                ParamSpec::int("levels", 10, 24, 20, "samples 2^levels"),
            ],
            run: ex::cuzick,
        },
        Experiment {
            name: "dyadic-sumset",
            claim: "A0 + A1 = [2, 3] although A0 and A1 both have dimension zero",
            metric: "missing",
            params: vec![ParamSpec::int("depth", 1, 16, 12, "binary digits")],
            run: ex::dyadic_sumset,
        },
        Experiment {
            name: "injectivity",
            claim: "P(B(A0) meets B(A1)) lies strictly between 0 and 1, so injectivity on a set is not a 0-1 event",
            metric: "estimate_mid_epsilon",
            params: vec![
                ParamSpec::int("depth", 1, 16, 12, "binary digits of A0, A1"),
                ParamSpec::int("trials", 1, 10_000_000, 10_000, "Monte Carlo trials"),
            ],
            run: ex::injectivity,
        },
        Experiment {
            name: "doublepoint-scaling",
            claim: "B + f has double points in d <= 3 and none in d >= 4; an fBM drift with alpha < 2/d restores them",
            metric: "exponent",
            params: with_drift(vec![
                ParamSpec::int("d", 2, 6, 2, "dimension"),
                ParamSpec::float("delta", 1e-3, 0.99, 0.25, "minimal time separation"),
                ParamSpec::int("level_lo", 4, 22, 12, "coarsest level"),
                ParamSpec::int("level_hi", 7, 24, 18, "finest level"),
                ParamSpec::int("seeds", 1, 10_000, 20, "independent paths"),
            ]),
            run: ex::doublepoint_scaling,
        },
        Experiment {
            name: "two-path-intersection",
            claim: "two independent drifted paths intersect in d <= 3 and miss each other in d >= 4",
            metric: "exponent",
            params: with_drift(vec![
                ParamSpec::int("d", 2, 6, 3, "dimension"),
                ParamSpec::float("separation", 0.0, 1e3, 0.3, "distance between the starting points"),
                ParamSpec::int("level_lo", 4, 22, 8, "coarsest level"),
                ParamSpec::int("level_hi", 7, 24, 14, "finest level"),
                ParamSpec::int("seeds", 1, 10_000, 20, "independent path pairs"),
            ]),
            run: ex::two_path_intersection,
        },
        Experiment {
            name: "rprime-inequalities",
            claim: "the increment correlation r' of B + X decays for separated intervals and 1 - r' is bounded below for clustered ones",
            metric: "clustered_min_ratio",
            params: vec![
                ParamSpec::float("alpha", 1e-3, 0.499, 0.3, "Hurst index, below 1/2"),
                ParamSpec::float("a", 1e-6, 1e6, 1.0, "interval length scale"),
                ParamSpec::float("delta", 1e-6, 1e6, 0.01, "configuration tolerance"),
                ParamSpec::list("separations", 1, &[10.0, 100.0, 1000.0], "values of L"),
                ParamSpec::int("resolution", 2, 200, 9, "grid points per axis"),
            ],
            run: ex::rprime_inequalities,
        },
    ]
});

pub fn find(name: &str) -> Option<&'static Experiment> {
    CATALOG.iter().find(|e| e.name == name)
}
