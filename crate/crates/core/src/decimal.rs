//! Config numerics may be written either as JSON numbers or as decimal strings.

use serde::de::{self, Deserializer};
use serde::Deserialize;

#[derive(Deserialize)]
#[serde(untagged)]
enum NumOrText {
    Num(f64),
    Text(String),
}

impl NumOrText {
    fn value<E: de::Error>(self) -> Result<f64, E> {
        match self {
            NumOrText::Num(v) => Ok(v),
            NumOrText::Text(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| E::custom(format!("{s:?} is not a decimal number"))),
        }
    }
}

pub fn number<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    NumOrText::deserialize(d)?.value()
}

pub fn numbers<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    Vec::<NumOrText>::deserialize(d)?
        .into_iter()
        .map(NumOrText::value)
        .collect()
}

pub fn optional_number<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    Option::<NumOrText>::deserialize(d)?
        .map(NumOrText::value)
        .transpose()
}

pub fn optional_numbers<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
    Option::<Vec<NumOrText>>::deserialize(d)?
        .map(|v| v.into_iter().map(NumOrText::value).collect())
        .transpose()
}
