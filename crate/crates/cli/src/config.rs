//! Run configuration: strict JSON parsing and validation.

use serde_json::Value;
use twistbeam::decomposition::{InitialState, QuadSpec, Truncation};
use twistbeam::envelope::StepControl;
use twistbeam::error::Error;
use twistbeam::fields::FieldProfile;
use twistbeam::propagation::GridSpec;

#[derive(Debug, Clone)]
pub struct BeamSpec {
    pub state: String,
    pub n: u32,
    pub l: i32,
    pub b0: f64,
    pub b0_prime: f64,
    pub charge_sign: f64,
    pub omega0: f64,
}

#[derive(Debug, Clone)]
pub struct OracleSpec {
    pub l_pad: i32,
    pub rho_max: Option<f64>,
    pub n_rho: Option<usize>,
    pub tol: f64,
    pub n_phi: usize,
    pub radial_stride: usize,
}

#[derive(Debug, Clone)]
pub struct VerifySpec {
    pub threshold: f64,
    pub z_compare: Vec<f64>,
    pub convergence_dz: Vec<f64>,
    pub convergence_z_end: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub field: FieldProfile,
    pub beam: BeamSpec,
    pub truncation: Truncation,
    pub z_schedule: Vec<f64>,
    pub z_span: (f64, f64),
    pub grid: GridSpec,
    pub envelope_ctrl: StepControl,
    pub quadrature: QuadSpec,
    pub oracle: OracleSpec,
    pub verify: VerifySpec,
    pub cartesian_samples: Option<usize>,
    /// Canonical (sorted-key) serialization of the raw document.
    pub canonical: String,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn get_f64(v: &Value, key: &str) -> Option<f64> {
    v.get(key).and_then(Value::as_f64)
}

fn req_f64(v: &Value, ctx: &str, key: &str) -> Result<f64, Error> {
    get_f64(v, key).ok_or_else(|| bad(format!("{ctx}: missing number `{key}`")))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let doc: Value =
            serde_json::from_str(text).map_err(|e| bad(format!("config is not valid JSON: {e}")))?;
        let obj = doc.as_object().ok_or_else(|| bad("config root must be an object"))?;
        const KNOWN: [&str; 10] = [
            "field",
            "beam",
            "truncation",
            "z",
            "grid",
            "envelope_solver",
            "quadrature",
            "oracle",
            "verify",
            "cartesian_samples",
        ];
        for key in obj.keys() {
            if !KNOWN.contains(&key.as_str()) {
                return Err(bad(format!("unknown config key `{key}`")));
            }
        }

        let field_v = doc.get("field").ok_or_else(|| bad("missing `field` section"))?;
        let field = FieldProfile::from_json_value(field_v)?;

        let beam_v = doc.get("beam").ok_or_else(|| bad("missing `beam` section"))?;
        let state = beam_v
            .get("state")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("beam: missing string `state`"))?
            .to_string();
        if state != "pure" && state != "half_blocked" {
            return Err(bad(format!(
                "beam.state must be `pure` or `half_blocked`, got `{state}`"
            )));
        }
        let n = beam_v
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("beam: missing non-negative integer `n`"))? as u32;
        let l = beam_v
            .get("l")
            .and_then(Value::as_i64)
            .ok_or_else(|| bad("beam: missing integer `l`"))? as i32;
        let b0 = get_f64(beam_v, "b0").unwrap_or(1.0);
        let b0_prime = get_f64(beam_v, "b0_prime").unwrap_or(0.0);
        if b0 <= 0.0 {
            return Err(bad("beam.b0 must be positive"));
        }
        let charge_sign = get_f64(beam_v, "charge_sign").unwrap_or(-1.0);
        if charge_sign != 1.0 && charge_sign != -1.0 {
            return Err(bad("beam.charge_sign must be +1 or -1"));
        }
        let omega0 = get_f64(beam_v, "omega0").unwrap_or(1.0);
        if omega0 <= 0.0 {
            return Err(bad("beam.omega0 must be positive"));
        }
        let beam = BeamSpec { state, n, l, b0, b0_prime, charge_sign, omega0 };

        let truncation = match doc.get("truncation") {
            None => Truncation::around(beam.l),
            Some(t) => {
                let n_max = t
                    .get("n_max")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| bad("truncation: missing `n_max`"))? as u32;
                let l_min = t
                    .get("l_min")
                    .and_then(Value::as_i64)
                    .ok_or_else(|| bad("truncation: missing `l_min`"))? as i32;
                let l_max = t
                    .get("l_max")
                    .and_then(Value::as_i64)
                    .ok_or_else(|| bad("truncation: missing `l_max`"))? as i32;
                if l_min > l_max {
                    return Err(bad("truncation: l_min > l_max"));
                }
                Truncation::new(n_max, l_min, l_max)
            }
        };

        let z_v = doc.get("z").ok_or_else(|| bad("missing `z` section"))?;
        let z_schedule: Vec<f64> = if let Some(list) = z_v.get("list").and_then(Value::as_array) {
            let mut out = Vec::new();
            for item in list {
                out.push(item.as_f64().ok_or_else(|| bad("z.list entries must be numbers"))?);
            }
            if out.is_empty() || out.windows(2).any(|w| w[1] <= w[0]) {
                return Err(bad("z.list must be non-empty and strictly increasing"));
            }
            out
        } else {
            let start = req_f64(z_v, "z", "start")?;
            let end = req_f64(z_v, "z", "end")?;
            let samples = z_v
                .get("samples")
                .and_then(Value::as_u64)
                .ok_or_else(|| bad("z: missing `samples`"))? as usize;
            if end <= start || samples < 2 {
                return Err(bad("z: need end > start and samples >= 2"));
            }
            (0..samples)
                .map(|k| start + (end - start) * k as f64 / (samples - 1) as f64)
                .collect()
        };
        let z_span = (z_schedule[0], *z_schedule.last().unwrap());

        let grid = match doc.get("grid") {
            None => GridSpec::standard(),
            Some(g) => GridSpec {
                n_rho: g.get("n_rho").and_then(Value::as_u64).unwrap_or(256) as usize,
                n_phi: g.get("n_phi").and_then(Value::as_u64).unwrap_or(256) as usize,
                rho_max: get_f64(g, "rho_max"),
                explicit: None,
            },
        };

        let envelope_ctrl = match doc.get("envelope_solver") {
            None => StepControl::default(),
            Some(e) => StepControl {
                atol: get_f64(e, "atol").unwrap_or(1e-10),
                rtol: get_f64(e, "rtol").unwrap_or(1e-10),
                max_step: get_f64(e, "max_step"),
                ..StepControl::default()
            },
        };

        let quadrature = match doc.get("quadrature") {
            None => QuadSpec::default(),
            Some(q) => QuadSpec {
                radial_order: q.get("radial_order").and_then(Value::as_u64).unwrap_or(200)
                    as usize,
                angular_order: q.get("angular_order").and_then(Value::as_u64).unwrap_or(512)
                    as usize,
                panel_order: q.get("panel_order").and_then(Value::as_u64).unwrap_or(160) as usize,
                captured_floor: get_f64(q, "captured_floor").unwrap_or(0.99),
            },
        };

        let oracle_v = doc.get("oracle");
        let oracle = OracleSpec {
            l_pad: oracle_v
                .and_then(|o| o.get("l_pad"))
                .and_then(Value::as_i64)
                .unwrap_or(0) as i32,
            rho_max: oracle_v.and_then(|o| get_f64(o, "rho_max")),
            n_rho: oracle_v
                .and_then(|o| o.get("n_rho"))
                .and_then(Value::as_u64)
                .map(|v| v as usize),
            tol: oracle_v.and_then(|o| get_f64(o, "tol")).unwrap_or(1e-7),
            n_phi: oracle_v
                .and_then(|o| o.get("n_phi"))
                .and_then(Value::as_u64)
                .unwrap_or(64) as usize,
            radial_stride: oracle_v
                .and_then(|o| o.get("radial_stride"))
                .and_then(Value::as_u64)
                .unwrap_or(4) as usize,
        };

        let verify_v = doc.get("verify");
        let verify = VerifySpec {
            threshold: verify_v.and_then(|v| get_f64(v, "threshold")).unwrap_or(1e-4),
            z_compare: match verify_v.and_then(|v| v.get("z_compare")).and_then(Value::as_array) {
                Some(list) => {
                    let mut out = Vec::new();
                    for item in list {
                        out.push(
                            item.as_f64()
                                .ok_or_else(|| bad("verify.z_compare entries must be numbers"))?,
                        );
                    }
                    out
                }
                None => vec![z_span.1],
            },
            convergence_dz: match verify_v
                .and_then(|v| v.get("convergence_dz"))
                .and_then(Value::as_array)
            {
                Some(list) => {
                    let mut out = Vec::new();
                    for item in list {
                        out.push(
                            item.as_f64()
                                .ok_or_else(|| bad("verify.convergence_dz must be numbers"))?,
                        );
                    }
                    out
                }
                None => Vec::new(),
            },
            convergence_z_end: verify_v.and_then(|v| get_f64(v, "convergence_z_end")),
        };

        let cartesian_samples = doc
            .get("cartesian_samples")
            .and_then(Value::as_u64)
            .map(|v| v as usize);

        // serde_json maps are sorted, so this re-serialization is canonical
        let canonical = doc.to_string();

        Ok(Self {
            field,
            beam,
            truncation,
            z_schedule,
            z_span,
            grid,
            envelope_ctrl,
            quadrature,
            oracle,
            verify,
            cartesian_samples,
            canonical,
        })
    }

    pub fn initial_state(&self) -> InitialState {
        let st = match self.beam.state.as_str() {
            "pure" => InitialState::pure(self.beam.n, self.beam.l),
            _ => InitialState::half_blocked(self.beam.n, self.beam.l),
        };
        st.with_envelope(self.beam.b0, self.beam.b0_prime)
    }
}
