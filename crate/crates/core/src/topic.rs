use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

/// A validated topic name: nonempty, `[a-z0-9_/]`, no leading or trailing
/// `/`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TopicName(String);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopicError {
    Empty,
    InvalidChar { name: String, ch: char },
    EdgeSlash { name: String },
}

impl fmt::Display for TopicError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopicError::Empty => f.write_str("topic name is empty"),
            TopicError::InvalidChar { name, ch } => {
                write!(f, "topic name {name:?} contains invalid character {ch:?}")
            }
            TopicError::EdgeSlash { name } => {
                write!(f, "topic name {name:?} starts or ends with '/'")
            }
        }
    }
}

impl core::error::Error for TopicError {}

impl TopicName {
    pub fn new(name: &str) -> Result<Self, TopicError> {
        if name.is_empty() {
            return Err(TopicError::Empty);
        }
        if let Some(ch) = name
            .chars()
            .find(|c| !matches!(c, 'a'..='z' | '0'..='9' | '_' | '/'))
        {
            return Err(TopicError::InvalidChar {
                name: name.to_string(),
                ch,
            });
        }
        if name.starts_with('/') || name.ends_with('/') {
            return Err(TopicError::EdgeSlash {
                name: name.to_string(),
            });
        }
        Ok(Self(name.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for TopicName {
    type Err = TopicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl fmt::Display for TopicName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for TopicName {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_plain_and_nested() {
        assert!(TopicName::new("data_input").is_ok());
        assert!(TopicName::new("robot/cam0/labels").is_ok());
    }

    #[test]
    fn rejects_bad_names() {
        assert_eq!(TopicName::new(""), Err(TopicError::Empty));
        assert!(matches!(
            TopicName::new("Data Input"),
            Err(TopicError::InvalidChar { ch: 'D', .. })
        ));
        assert!(matches!(
            TopicName::new("/data"),
            Err(TopicError::EdgeSlash { .. })
        ));
        assert!(matches!(
            TopicName::new("data/"),
            Err(TopicError::EdgeSlash { .. })
        ));
    }
}
