//! Canonical text encoding.
//!
//! Every byte string that gets signed, MACed, hashed into an index or used as
//! AEAD associated data goes through [`canonical_encode`]. The format is JSON
//! restricted to objects, arrays, strings, integers and booleans, with object
//! keys sorted by their UTF-8 bytes and no whitespace. Binary fields are
//! carried as unpadded base64url strings (see [`b64`]).

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum EncodingError {
    #[error("unsupported value shape: {0}")]
    Unsupported(&'static str),
    #[error("malformed encoding: {0}")]
    Malformed(String),
    #[error("input is not in canonical form")]
    NotCanonical,
}

impl From<serde_json::Error> for EncodingError {
    fn from(err: serde_json::Error) -> Self {
        EncodingError::Malformed(err.to_string())
    }
}

/// Encodes `value` canonically. Floats and nulls are rejected.
pub fn canonical_encode<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, EncodingError> {
    let value = serde_json::to_value(value)?;
    encode_value(&value)
}

/// Encodes an already-built JSON value canonically.
pub fn encode_value(value: &Value) -> Result<Vec<u8>, EncodingError> {
    let mut out = Vec::with_capacity(64);
    write_value(value, &mut out)?;
    Ok(out)
}

fn write_value(value: &Value, out: &mut Vec<u8>) -> Result<(), EncodingError> {
    match value {
        Value::Null => return Err(EncodingError::Unsupported("null")),
        Value::Bool(b) => out.extend_from_slice(if *b { b"true" } else { b"false" }),
        Value::Number(n) => {
            if n.is_f64() {
                return Err(EncodingError::Unsupported("floating-point number"));
            }
            out.extend_from_slice(n.to_string().as_bytes());
        }
        Value::String(s) => out.extend_from_slice(serde_json::to_string(s)?.as_bytes()),
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(item, out)?;
            }
            out.push(b']');
        }
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_unstable_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push(b'{');
            for (i, (key, item)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                out.extend_from_slice(serde_json::to_string(key)?.as_bytes());
                out.push(b':');
                write_value(item, out)?;
            }
            out.push(b'}');
        }
    }
    Ok(())
}

/// Parses canonical bytes into a JSON value, rejecting anything that does not
/// re-encode to exactly the same bytes.
pub fn decode_value(bytes: &[u8]) -> Result<Value, EncodingError> {
    let value: Value = serde_json::from_slice(bytes)?;
    if encode_value(&value)? != bytes {
        return Err(EncodingError::NotCanonical);
    }
    Ok(value)
}

/// Decodes canonical bytes into `T`.
pub fn canonical_decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, EncodingError> {
    let value = decode_value(bytes)?;
    Ok(serde_json::from_value(value)?)
}

/// Unpadded base64url helpers for serde `with` attributes.
pub mod b64 {
    use base64::engine::general_purpose::URL_SAFE_NO_PAD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn encode(bytes: &[u8]) -> String {
        URL_SAFE_NO_PAD.encode(bytes)
    }

    pub fn decode(text: &str) -> Result<Vec<u8>, base64::DecodeError> {
        URL_SAFE_NO_PAD.decode(text)
    }

    pub fn serialize<S: Serializer, T: AsRef<[u8]>>(bytes: &T, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&encode(bytes.as_ref()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(de)?;
        decode(&text).map_err(serde::de::Error::custom)
    }

    /// Same as the parent module, for fixed-length arrays.
    pub mod array {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer, const N: usize>(
            bytes: &[u8; N],
            ser: S,
        ) -> Result<S::Ok, S::Error> {
            ser.serialize_str(&super::encode(bytes))
        }

        pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(
            de: D,
        ) -> Result<[u8; N], D::Error> {
            let text = String::deserialize(de)?;
            let bytes = super::decode(&text).map_err(serde::de::Error::custom)?;
            bytes.try_into().map_err(|v: Vec<u8>| {
                serde::de::Error::custom(format!("expected {N} bytes, got {}", v.len()))
            })
        }
    }
}
