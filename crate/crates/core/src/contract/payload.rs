use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{ContractError, TablePayload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modality {
    Text,
    Table,
    ChartSpec,
    FileAttachment,
    Composite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartKind {
    Bar,
    Line,
    Pie,
}

impl ChartKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bar" => Some(Self::Bar),
            "line" => Some(Self::Line),
            "pie" => Some(Self::Pie),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bar => "bar",
            Self::Line => "line",
            Self::Pie => "pie",
        }
    }
}

/// Declarative chart description; rendering is left to the client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChartSpec {
    pub kind: ChartKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FileAttachment {
    pub filename: String,
    pub media_type: String,
    #[serde(serialize_with = "to_base64", deserialize_with = "from_base64")]
    pub bytes: Vec<u8>,
}

fn to_base64<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&STANDARD.encode(bytes))
}

fn from_base64<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
    let s = String::deserialize(d)?;
    STANDARD.decode(s).map_err(serde::de::Error::custom)
}

/// What an agent shows the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResponsePayload {
    pub modality: Modality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TablePayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attachment: Option<FileAttachment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parts: Option<Vec<ResponsePayload>>,
}

impl ResponsePayload {
    fn empty(modality: Modality) -> Self {
        Self {
            modality,
            text: None,
            table: None,
            chart: None,
            attachment: None,
            parts: None,
        }
    }

    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: Some(text.into()),
            ..Self::empty(Modality::Text)
        }
    }

    pub fn table(table: TablePayload) -> Self {
        Self {
            table: Some(table),
            ..Self::empty(Modality::Table)
        }
    }

    pub fn chart(chart: ChartSpec) -> Self {
        Self {
            chart: Some(chart),
            ..Self::empty(Modality::ChartSpec)
        }
    }

    pub fn attachment(attachment: FileAttachment) -> Self {
        Self {
            attachment: Some(attachment),
            ..Self::empty(Modality::FileAttachment)
        }
    }

    pub fn composite(parts: Vec<ResponsePayload>) -> Self {
        Self {
            parts: Some(parts),
            ..Self::empty(Modality::Composite)
        }
    }

    /// The empty text response used for timed-out or failed previews.
    pub fn blank() -> Self {
        Self::text("")
    }

    /// Concatenated text of this payload and, for composites, its parts.
    pub fn plain_text(&self) -> String {
        match self.modality {
            Modality::Composite => self
                .parts
                .iter()
                .flatten()
                .map(ResponsePayload::plain_text)
                .filter(|s| !s.is_empty())
                .collect::<Vec<_>>()
                .join("\n"),
            _ => self.text.clone().unwrap_or_default(),
        }
    }

    /// Modalities of this payload and its parts, depth first.
    pub fn modalities(&self) -> Vec<Modality> {
        let mut out = vec![self.modality];
        for p in self.parts.iter().flatten() {
            out.extend(p.modalities());
        }
        out
    }

    pub fn find_table(&self) -> Option<&TablePayload> {
        self.table
            .as_ref()
            .or_else(|| self.parts.iter().flatten().find_map(|p| p.find_table()))
    }

    pub fn find_chart(&self) -> Option<&ChartSpec> {
        self.chart
            .as_ref()
            .or_else(|| self.parts.iter().flatten().find_map(|p| p.find_chart()))
    }

    pub fn find_attachment(&self) -> Option<&FileAttachment> {
        self.attachment.as_ref().or_else(|| {
            self.parts
                .iter()
                .flatten()
                .find_map(|p| p.find_attachment())
        })
    }

    /// Exactly the fields required by `modality` are populated.
    pub fn validate(&self) -> Result<(), ContractError> {
        let present = [
            (Modality::Text, self.text.is_some()),
            (Modality::Table, self.table.is_some()),
            (Modality::ChartSpec, self.chart.is_some()),
            (Modality::FileAttachment, self.attachment.is_some()),
            (Modality::Composite, self.parts.is_some()),
        ];
        for (m, is_set) in present {
            if (m == self.modality) != is_set {
                return Err(ContractError::InvalidPayload(format!(
                    "{:?} payload has wrong fields populated",
                    self.modality
                )));
            }
        }
        for p in self.parts.iter().flatten() {
            p.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_validate() {
        assert!(ResponsePayload::text("hi").validate().is_ok());
        let composite = ResponsePayload::composite(vec![
            ResponsePayload::text("a"),
            ResponsePayload::attachment(FileAttachment {
                filename: "r.csv".into(),
                media_type: "text/csv".into(),
                bytes: b"a,b\n".to_vec(),
            }),
        ]);
        assert!(composite.validate().is_ok());
        assert_eq!(
            composite.modalities(),
            [Modality::Composite, Modality::Text, Modality::FileAttachment]
        );
    }

    #[test]
    fn extra_field_is_rejected() {
        let mut p = ResponsePayload::text("hi");
        p.parts = Some(vec![]);
        assert!(p.validate().is_err());
        let mut p = ResponsePayload::text("hi");
        p.text = None;
        assert!(p.validate().is_err());
    }

    #[test]
    fn attachment_bytes_travel_as_base64() {
        let p = ResponsePayload::attachment(FileAttachment {
            filename: "r.csv".into(),
            media_type: "text/csv".into(),
            bytes: vec![0, 255, 10],
        });
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"bytes\":\"AP8K\""));
        assert_eq!(serde_json::from_str::<ResponsePayload>(&json).unwrap(), p);
    }
}
