//! Loading of TOML configuration files.

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

pub fn from_toml_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(toml::from_str(text)?)
}

/// Reads and parses a TOML file. An unreadable file is a config error.
pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::Hyperparams;

    #[test]
    fn partial_tables_fill_defaults() {
        let hp: Hyperparams = from_toml_str("[forest]\nn_trees = 7\n[gbt]\nlearning_rate = 0.1\n").unwrap();
        assert_eq!(hp.forest.n_trees, 7);
        assert_eq!(hp.forest.tree.max_depth, 12);
        assert_eq!(hp.gbt.learning_rate, 0.1);
    }

    #[test]
    fn unknown_fields_and_missing_files_are_config_errors() {
        assert!(from_toml_str::<Hyperparams>("[forest]\nn_trees = \"many\"\n").unwrap_err().is_config());
        assert!(load_toml::<Hyperparams>(Path::new("/nonexistent/x.toml")).unwrap_err().is_config());
    }
}
