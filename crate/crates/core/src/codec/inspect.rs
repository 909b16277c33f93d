use super::header::{decode, Decoded, HeaderKind};
use super::CodecError;

/// Human-readable `name=value` dump of a received frame, one field per line.
pub fn inspect_lines(bytes: &[u8]) -> Result<Vec<String>, CodecError> {
    let mut lines = Vec::new();
    match decode(bytes)? {
        Decoded::LimaFrame { header, inner } => {
            lines.push(format!(
                "class=LIMA {:?}, src={}, seq={}, target={}",
                header.header_type(),
                header.source,
                header.seq,
                header.target().map(|t| t.to_string()).unwrap_or_else(|| "-".into())
            ));
            lines.push(format!("version={}", header.version));
            lines.push(format!("header_type={:?}", header.header_type()));
            lines.push(format!("source={}", header.source));
            lines.push(format!("seq={}", header.seq));
            lines.push(format!("sender={}", header.sender));
            lines.push(format!("ed_snr={}", header.ed_snr));
            lines.push(format!("ed_sf={}", header.ed_sf));
            lines.push(format!("opt_len={}", header.encoded_len() - super::HEADER_BASE_LEN));
            match &header.kind {
                HeaderKind::UplinkData { target } | HeaderKind::DownlinkData { target } => {
                    lines.push(format!("target={target}"))
                }
                HeaderKind::Rem(rem) => {
                    lines.push(format!("tp_code=0x{:02X}", rem.tp_code));
                    lines.push(format!("cost_from_source={}", rem.cost_from_source));
                    let rx: Vec<String> = rem.direct_receivables.iter().map(|a| a.to_string()).collect();
                    lines.push(format!("direct_receivables={}", rx.join(",")));
                }
                HeaderKind::Reserved(raw) => lines.push(format!("options={}", hex(raw))),
            }
            lines.push(format!("inner_len={}", inner.len()));
            if !inner.is_empty() {
                lines.push(format!("inner={}", hex(&inner)));
            }
        }
        Decoded::EdFrame(view) => {
            let addr = view.dev_addr.map(|a| a.to_string());
            lines.push(format!(
                "class=LoRaWAN {}, DevAddr={}",
                view.mtype.name(),
                addr.clone().unwrap_or_else(|| "-".into())
            ));
            lines.push(format!("mtype={}", view.mtype.name()));
            if let Some(a) = addr {
                lines.push(format!("dev_addr={a}"));
            }
            if let Some(eui) = view.dev_eui {
                lines.push(format!("dev_eui={eui}"));
            }
            if let Some(fctrl) = view.fctrl {
                lines.push(format!("fctrl=0x{fctrl:02X}"));
            }
            if let Some(fcnt) = view.fcnt {
                lines.push(format!("fcnt={fcnt}"));
            }
            lines.push(format!("mac_payload_len={}", view.mac_payload_len()));
            lines.push(format!("mic={}", hex(&view.mic)));
        }
    }
    Ok(lines)
}

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02X}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lima_summary_line() {
        let bytes = [0xE0, 0x00, 0x01, 0x05, 0x00, 0x01, 7, 7, 2, 0x00, 0xFF];
        let lines = inspect_lines(&bytes).unwrap();
        assert_eq!(lines[0], "class=LIMA UplinkData, src=0x0001, seq=5, target=0x00FF");
        assert!(lines.contains(&"ed_snr=7".to_string()));
    }

    #[test]
    fn lorawan_summary_line() {
        let bytes = [0x40, 0x04, 0x03, 0x02, 0x01, 0x00, 0x01, 0x00, 0xDE, 0xAD, 0xBE, 0xEF];
        let lines = inspect_lines(&bytes).unwrap();
        assert_eq!(lines[0], "class=LoRaWAN UnconfirmedDataUp, DevAddr=01020304");
        assert!(lines.contains(&"fcnt=1".to_string()));
    }
}
