use alloc::format;
use alloc::string::String;

/// The three extraction backends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BackendKind {
    /// Fixed-GOP MPEG-4 Part 2 reader (emulated: half-pel, 16×16 blocks).
    NativeFixedGop,
    /// Motion vectors exported by the decoder as sidecar CSV.
    SidecarExport,
    /// Motion and residual reconstructed from decoded RGB frames.
    RgbProxy,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::NativeFixedGop => "native_fixed_gop",
            BackendKind::SidecarExport => "sidecar_export",
            BackendKind::RgbProxy => "rgb_proxy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "native_fixed_gop" | "native" => Some(BackendKind::NativeFixedGop),
            "sidecar_export" | "sidecar" => Some(BackendKind::SidecarExport),
            "rgb_proxy" | "proxy" => Some(BackendKind::RgbProxy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BackendChoice {
    pub kind: BackendKind,
    pub reason: String,
}

impl BackendChoice {
    pub fn new(kind: BackendKind, reason: impl Into<String>) -> Self {
        Self {
            kind,
            reason: reason.into(),
        }
    }
}

/// Codecs whose decoders export motion vectors as side data.
const SIDECAR_CODECS: [&str; 4] = ["h264", "hevc", "vp9", "av1"];

/// Pick a backend for a stream. Total: every input maps to a backend, and
/// the RGB proxy is the fallback for everything else.
pub fn route_backend(codec_tag: &str, native_available: bool, sidecar_available: bool) -> BackendChoice {
    let tag = codec_tag.trim().to_ascii_lowercase();
    if tag == "mpeg4" {
        if native_available {
            return BackendChoice::new(
                BackendKind::NativeFixedGop,
                "mpeg4 with native fixed-GOP reader available",
            );
        }
        return BackendChoice::new(
            BackendKind::RgbProxy,
            "mpeg4 but native reader unavailable; falling back to rgb proxy",
        );
    }
    if SIDECAR_CODECS.contains(&tag.as_str()) {
        if sidecar_available {
            return BackendChoice::new(
                BackendKind::SidecarExport,
                format!("{tag} with exported motion-vector side data"),
            );
        }
        return BackendChoice::new(
            BackendKind::RgbProxy,
            format!("{tag} without side data; falling back to rgb proxy"),
        );
    }
    BackendChoice::new(
        BackendKind::RgbProxy,
        format!("codec '{tag}' has no compressed-domain backend; using rgb proxy"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_assignments() {
        for native in [false, true] {
            assert_eq!(route_backend("h264", native, true).kind, BackendKind::SidecarExport);
            assert_eq!(route_backend("vp6f", native, true).kind, BackendKind::RgbProxy);
            assert_eq!(route_backend("vp6f", native, false).kind, BackendKind::RgbProxy);
        }
        assert_eq!(route_backend("mpeg4", true, true).kind, BackendKind::NativeFixedGop);
        assert_eq!(route_backend("mpeg4", false, true).kind, BackendKind::RgbProxy);
        assert_eq!(route_backend("HEVC", false, true).kind, BackendKind::SidecarExport);
        assert_eq!(route_backend("av1", true, false).kind, BackendKind::RgbProxy);
    }

    #[test]
    fn reason_names_the_rule() {
        assert!(route_backend("vp9", false, true).reason.contains("side data"));
        assert!(route_backend("theora", false, false).reason.contains("rgb proxy"));
    }

    #[test]
    fn names_round_trip() {
        for k in [BackendKind::NativeFixedGop, BackendKind::SidecarExport, BackendKind::RgbProxy] {
            assert_eq!(BackendKind::parse(k.as_str()), Some(k));
        }
    }
}
