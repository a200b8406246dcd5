//! Keyword intent compiler. It stands in for a language model when
//! building scripted replay tables: it only picks up what the text says and
//! leaves the rest for validation feedback to fill.

use serde_json::{json, Value};

use super::backend::{Reply, ScriptStep, ToolCall};
use super::Mode;

fn tokens(text: &str) -> Vec<String> {
    text.to_ascii_lowercase()
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '.' || c == '_'))
        .map(|t| t.trim_end_matches('.').to_owned())
        .filter(|t| !t.is_empty())
        .collect()
}

fn has(toks: &[String], words: &[&str]) -> bool {
    toks.iter().any(|t| words.contains(&t.as_str()))
}

fn number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|n| n.is_finite())
}

fn word_number(s: &str) -> Option<f64> {
    let n = match s {
        "a" | "an" | "one" | "single" => 1,
        "two" => 2,
        "three" => 3,
        "four" => 4,
        "five" => 5,
        "six" => 6,
        _ => return number(s),
    };
    Some(n as f64)
}

/// Number directly before one of `units`, e.g. "15 mbps" or "15mbps".
fn quantity(toks: &[String], units: &[&str]) -> Option<f64> {
    for (i, t) in toks.iter().enumerate() {
        if units.contains(&t.as_str()) && i > 0 {
            if let Some(n) = word_number(&toks[i - 1]) {
                return Some(n);
            }
        }
        for u in units {
            if let Some(n) = t.strip_suffix(u).and_then(number) {
                return Some(n);
            }
        }
    }
    None
}

/// Number directly after one of `keys`, e.g. "scenario 4".
fn after(toks: &[String], keys: &[&str]) -> Option<f64> {
    toks.windows(2).find(|w| keys.contains(&w[0].as_str())).and_then(|w| number(&w[1]))
}

fn int(n: f64) -> Value {
    json!(n as i64)
}

/// Field assignments the text states outright.
pub fn compile_intent(text: &str, mode: Mode) -> Vec<(String, Value)> {
    let t = tokens(text);
    let mut out: Vec<(String, Value)> = Vec::new();
    let mut put = |k: &str, v: Value| {
        if !out.iter().any(|(x, _)| x == k) {
            out.push((k.to_owned(), v));
        }
    };
    match mode {
        Mode::Deploy => {
            if has(&t, &["open5gs"]) {
                put("core", json!("open5gs"));
            }
            if has(&t, &["srsran"]) {
                put("cu", json!("srsran"));
                put("du_high", json!("srsran"));
            }
            if has(&t, &["oai", "openairinterface"]) || text.to_ascii_lowercase().contains("open air interface") {
                put("cu", json!("oai"));
                put("du_high", json!("oai"));
            }
            let no_gpu = text.to_ascii_lowercase().contains("without gpu")
                || text.to_ascii_lowercase().contains("no gpu")
                || text.to_ascii_lowercase().contains("without acceleration")
                || has(&t, &["cpu-only", "cpu"]);
            if no_gpu {
                put("du_low", json!("none"));
            } else if has(&t, &["arc", "aerial", "cubb", "gpu", "accelerated", "acceleration", "gpus", "nvidia"]) {
                put("du_low", json!("cubb"));
            }
            if has(&t, &["x410"]) {
                put("ru", json!("usrp_x410"));
            } else if has(&t, &["usrp", "x310", "sdr"]) {
                put("ru", json!("usrp_x310"));
            } else if has(&t, &["foxconn", "7.2"]) {
                put("ru", json!("foxconn"));
            } else if has(&t, &["rusim", "emulator", "emulated"]) {
                put("ru", json!("rusim"));
            }
            if let Some(n) = after(&t, &["scenario", "id"]) {
                put("id", int(n));
            }
            if let Some(n) = after(&t, &["room", "location"]) {
                put("ru.location", int(n));
            }
        }
        Mode::Test => {
            if has(&t, &["iperf", "iperf3"]) {
                put("test_type", json!("iperf"));
            } else if has(&t, &["mgen"]) {
                put("test_type", json!("mgen"));
            }
            if let Some(n) = quantity(&t, &["mbps", "mbit", "mbit/s"]) {
                put("bandwidth_mbps", json!(n));
            } else if let Some(n) = quantity(&t, &["gbps"]) {
                put("bandwidth_mbps", json!(n * 1000.0));
            }
            if let Some(n) = quantity(&t, &["ues", "ue", "phones", "devices", "modems", "users"]) {
                put("ue_count", int(n));
            }
            if let Some(n) = quantity(&t, &["s", "sec", "secs", "seconds", "second"]) {
                put("duration", int(n));
            } else if let Some(n) = quantity(&t, &["min", "mins", "minutes", "minute"]) {
                put("duration", int(n * 60.0));
            }
            if has(&t, &["tcp"]) {
                put("protocol", json!("tcp"));
            } else if has(&t, &["udp"]) {
                put("protocol", json!("udp"));
            }
            if has(&t, &["uplink", "ul"]) {
                put("reverse", json!(false));
            } else if has(&t, &["downlink", "dl"]) {
                put("reverse", json!(true));
            }
            for d in ["poisson", "burst", "periodic"] {
                if has(&t, &[d]) {
                    put("distribution", json!(d));
                }
            }
            if let Some(n) = after(&t, &["scenario", "deployment"]) {
                put("scenario_id", int(n));
            }
        }
    }
    out
}

/// Sets everything stated, validates, then leans on feedback.
pub fn convergent_script(assignments: &[(String, Value)]) -> Vec<ScriptStep> {
    let mut calls: Vec<ToolCall> = assignments.iter().map(|(k, v)| ToolCall::set(k, v.clone())).collect();
    calls.push(ToolCall::validate());
    let mut steps = vec![ScriptStep::Reply { reply: Reply::ToolCalls(calls) }];
    steps.extend(std::iter::repeat_n(ScriptStep::CompleteFromFeedback, 3));
    steps
}

/// A worst-case but still convergent model: it opens with a bogus RU and a
/// misspelt path, sets fields in reverse order without ever touching the
/// core, lapses into prose once, and then follows feedback.
pub fn adversarial_script(assignments: &[(String, Value)]) -> Vec<ScriptStep> {
    let first = vec![ToolCall::set("ru", json!("bogus-radio")), ToolCall::set("du_hihg", json!("oai")), ToolCall::validate()];
    let mut rest: Vec<ToolCall> = assignments.iter().rev().filter(|(k, _)| k != "core").map(|(k, v)| ToolCall::set(k, v.clone())).collect();
    rest.sort_by_key(|c| c.arguments["name"] != "ru");
    let mut steps = vec![
        ScriptStep::Reply { reply: Reply::ToolCalls(first) },
        ScriptStep::Reply { reply: Reply::Text("The configuration looks fine to me.".into()) },
        ScriptStep::Reply { reply: Reply::ToolCalls(rest) },
    ];
    steps.extend(std::iter::repeat_n(ScriptStep::CompleteFromFeedback, 4));
    steps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn get(a: &[(String, Value)], k: &str) -> Option<Value> {
        a.iter().find(|(x, _)| x == k).map(|(_, v)| v.clone())
    }

    #[test]
    fn picks_up_components() {
        let a = compile_intent("deploy a 5G gNB with OAI and NVIDIA ARC", Mode::Deploy);
        assert_eq!(get(&a, "du_low"), Some(json!("cubb")));
        assert_eq!(get(&a, "cu"), Some(json!("oai")));
        assert_eq!(get(&a, "ru"), None);
        let b = compile_intent("srsRAN on a USRP X410 without GPU, room 640", Mode::Deploy);
        assert_eq!(get(&b, "ru"), Some(json!("usrp_x410")));
        assert_eq!(get(&b, "du_low"), Some(json!("none")));
        assert_eq!(get(&b, "ru.location"), Some(json!(640)));
    }

    #[test]
    fn picks_up_quantities() {
        let a = compile_intent("perform a 15 Mbps iPerf test with 3 UEs", Mode::Test);
        assert_eq!(get(&a, "bandwidth_mbps"), Some(json!(15.0)));
        assert_eq!(get(&a, "ue_count"), Some(json!(3)));
        assert_eq!(get(&a, "test_type"), Some(json!("iperf")));
        let b = compile_intent("2 minute uplink tcp test at 1.5gbps with one UE", Mode::Test);
        assert_eq!(get(&b, "duration"), Some(json!(120)));
        assert_eq!(get(&b, "bandwidth_mbps"), Some(json!(1500.0)));
        assert_eq!(get(&b, "reverse"), Some(json!(false)));
        assert_eq!(get(&b, "ue_count"), Some(json!(1)));
    }
}
