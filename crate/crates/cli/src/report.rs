//! Attack report emission: a JSON document with the full picture and a CSV
//! summary (one row per target VDO) for plotting.

use serde_json::{json, Value};

use sdd_core::sybil::{AttackConfig, SybilReport};

pub fn report_json(config: &AttackConfig, report: &SybilReport) -> Value {
    json!({
        "config": {
            "identity_count": config.identity_count,
            "hop_interval": config.hop_interval,
            "duration": config.duration,
            "size_filter": config.size_filter,
            "seed": config.seed,
        },
        "started_at": report.started_at,
        "ended_at": report.ended_at,
        "coverage": report.coverage,
        "harvest_log_entries": report.log.entries.len(),
        "targets": report
            .outcomes
            .iter()
            .enumerate()
            .map(|(i, o)| {
                json!({
                    "target": i,
                    "mode": o.mode.name(),
                    "shares_harvested": o.shares_harvested,
                    "k_reached": o.k_reached,
                    "secrets_recovered": o.secrets_recovered,
                    "lifetime_access": o.lifetime_access,
                    "plaintext_recovered": o.plaintext_recovered,
                })
            })
            .collect::<Vec<_>>(),
    })
}

pub fn report_csv(report: &SybilReport) -> String {
    let mut out = String::from(
        "target,mode,shares_harvested,k_reached,secrets_recovered,lifetime_access,plaintext_recovered\n",
    );
    for (i, o) in report.outcomes.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            i,
            o.mode.name(),
            o.shares_harvested,
            o.k_reached,
            o.secrets_recovered,
            o.lifetime_access,
            o.plaintext_recovered
        ));
    }
    out
}
