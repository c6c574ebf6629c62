use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Column;

/// Distinct strings of one column; a string's code is its index.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dictionary {
    pub column: String,
    pub values: Vec<String>,
}

impl Dictionary {
    pub fn new(column: impl Into<String>) -> Self {
        Self {
            column: column.into(),
            values: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn code(&self, value: &str) -> Option<i32> {
        self.values
            .iter()
            .position(|v| v == value)
            .map(|i| i as i32)
    }

    pub fn decode(&self, code: i32) -> Option<&str> {
        usize::try_from(code)
            .ok()
            .and_then(|i| self.values.get(i))
            .map(String::as_str)
    }
}

/// Encodes `strings` with codes assigned in order of first appearance.
pub fn dict_encode<S: AsRef<str>>(column: &str, strings: &[S]) -> (Column, Dictionary) {
    let mut dict = Dictionary::new(column);
    let mut index: HashMap<&str, i32> = HashMap::new();
    let codes = strings
        .iter()
        .map(|s| {
            let s = s.as_ref();
            *index.entry(s).or_insert_with(|| {
                dict.values.push(s.to_owned());
                (dict.values.len() - 1) as i32
            })
        })
        .collect();
    (Column::int32(column, codes), dict)
}

pub fn dict_decode(codes: &[i32], dict: &Dictionary) -> Option<Vec<String>> {
    codes
        .iter()
        .map(|&c| dict.decode(c).map(str::to_owned))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_appearance_codes() {
        let (col, dict) = dict_encode("r", &["ASIA", "ASIA"]);
        assert_eq!(col.as_i32().unwrap(), &[0, 0]);
        assert_eq!(dict.values, vec!["ASIA"]);
        let regions = ["AFRICA", "AMERICA", "ASIA", "EUROPE", "MIDDLE EAST"];
        let (col, dict) = dict_encode("r", &regions);
        assert_eq!(col.as_i32().unwrap(), &[0, 1, 2, 3, 4]);
        assert_eq!(dict.code("ASIA"), Some(2));
        assert_eq!(dict_decode(col.as_i32().unwrap(), &dict).unwrap(), regions);
        assert_eq!(dict.decode(5), None);
        assert_eq!(dict.decode(-1), None);
    }
}
