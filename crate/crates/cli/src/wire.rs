//! The key server's wire protocol: newline-delimited UTF-8 JSON frames over
//! a reliable byte stream. Binary fields travel as lowercase hex.
//!
//! Requests and responses:
//!
//! ```text
//! {"type":"CREATE","expires_at":7200}        -> {"type":"CREATED","h":..,"id_t":..,"n_t":..}
//! {"type":"ACK_ENCRYPTED","id_t":..,"n":50,"k":45}
//!                                            -> {"type":"SHARES_PLACED","l":..,"k":45}
//! {"type":"REQUEST_KEY","n_t":..,"id_t":..}  -> {"type":"KEY","h":..} | {"type":"REFUSED","reason":..}
//! {"type":"REFRESH","id_t":..}               -> {"type":"REFRESHED","l":..} | {"type":"REFUSED","reason":..}
//! ```
//!
//! Expired and unknown ids share the refusal reason `expired_or_unknown`.
//! A frame that is not valid JSON (or not a known type) gets
//! `{"type":"REFUSED","reason":"malformed"}` and the connection stays open.

use serde_json::{json, Value};

use sdd_core::ephemerizer::EphError;
use sdd_core::field::production_prime;
use sdd_core::crypto::{EphemeralId, Nonce128};
use sdd_core::sharing::{SharingError, SharingParams};

use crate::env::SimEnv;

fn refused(reason: &str) -> Value {
    json!({"type": "REFUSED", "reason": reason})
}

fn hex_field(frame: &Value, key: &str, len: usize) -> Option<Vec<u8>> {
    let s = frame.get(key)?.as_str()?;
    let bytes = hex::decode(s).ok()?;
    (bytes.len() == len).then_some(bytes)
}

fn u16_field(frame: &Value, key: &str) -> Option<u16> {
    frame.get(key)?.as_u64()?.try_into().ok()
}

fn eph_error_reason(e: &EphError) -> &'static str {
    match e {
        EphError::IdSpaceExhausted => "id_space_exhausted",
        EphError::InvalidExpiry => "invalid_expiry",
        EphError::UnknownId => "expired_or_unknown",
        EphError::AlreadyDistributed => "already_distributed",
        EphError::WrongRecordKind => "expired_or_unknown",
        EphError::NoAccessKeyRetained => "no_access_key",
        EphError::ReconstructionMismatch => "reconstruction_mismatch",
        EphError::Dht(_) => "dht_unavailable",
        EphError::Sharing(SharingError::InsufficientShares { .. }) => "insufficient_shares",
        EphError::Sharing(_) => "invalid_sharing_params",
    }
}

/// Handles one request frame against the environment and returns the
/// response frame.
pub fn handle_frame(env: &mut SimEnv, line: &str) -> Value {
    let Ok(frame) = serde_json::from_str::<Value>(line) else {
        return refused("malformed");
    };
    let Some(kind) = frame.get("type").and_then(Value::as_str) else {
        return refused("malformed");
    };
    match kind {
        "CREATE" => {
            let Some(expires_at) = frame.get("expires_at").and_then(Value::as_u64) else {
                return refused("malformed");
            };
            let read_once = frame.get("read_once").and_then(Value::as_bool).unwrap_or(false);
            match env.server.create_key(expires_at, read_once) {
                Ok(grant) => json!({
                    "type": "CREATED",
                    "h": hex::encode(grant.h.as_bytes()),
                    "id_t": grant.id_t.value(),
                    "n_t": hex::encode(grant.n_t.as_bytes()),
                }),
                Err(e) => refused(eph_error_reason(&e)),
            }
        }
        "ACK_ENCRYPTED" => {
            let (Some(id_t), Some(n), Some(k)) = (
                u16_field(&frame, "id_t"),
                u16_field(&frame, "n"),
                u16_field(&frame, "k"),
            ) else {
                return refused("malformed");
            };
            let params = match SharingParams::new(n, k, production_prime().clone()) {
                Ok(p) => p,
                Err(_) => return refused("invalid_sharing_params"),
            };
            match env.server.distribute_shares(EphemeralId(id_t), &params, &mut env.dht) {
                Ok((l, k)) => json!({
                    "type": "SHARES_PLACED",
                    "l": hex::encode(l.as_bytes()),
                    "k": k,
                }),
                Err(e) => refused(eph_error_reason(&e)),
            }
        }
        "REQUEST_KEY" => {
            let (Some(n_t), Some(id_t)) =
                (hex_field(&frame, "n_t", 16), u16_field(&frame, "id_t"))
            else {
                return refused("malformed");
            };
            let n_t = Nonce128(n_t.try_into().expect("length checked"));
            match env.server.request_key(&n_t, EphemeralId(id_t)) {
                Ok(h) => json!({"type": "KEY", "h": hex::encode(h.as_bytes())}),
                Err(refusal) => refused(refusal.wire_reason()),
            }
        }
        "REFRESH" => {
            let Some(id_t) = u16_field(&frame, "id_t") else {
                return refused("malformed");
            };
            match env.server.refresh(EphemeralId(id_t), &mut env.dht) {
                Ok(l) => json!({"type": "REFRESHED", "l": hex::encode(l.as_bytes())}),
                Err(e) => refused(eph_error_reason(&e)),
            }
        }
        _ => refused("malformed"),
    }
}
