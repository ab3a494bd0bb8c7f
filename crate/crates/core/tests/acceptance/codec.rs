use std::panic::catch_unwind;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segames_core::protocol::{decode_frame, encode, ChatMessage, ControlMessage, Message, Opcode};

use crate::ensure;

const ROUND_TRIPS: usize = 10_000;
const FUZZ_FRAMES: usize = 100_000;
const BUDGET: Duration = Duration::from_secs(10);

const FIELD_CHARS: &[char] = &[
    'a', 'b', 'z', 'Q', '0', '9', ' ', '|', '\\', '>', '#', '!', 'p', 'n', 'r', '\n', '\r', '\t', 'é', '中', '🙂',
];

fn random_string(rng: &mut ChaCha8Rng, max: usize, alphabet: &[char]) -> String {
    let len = rng.gen_range(0..=max);
    (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
}

fn random_control(rng: &mut ChaCha8Rng) -> ControlMessage {
    let opcode = Opcode::ALL[rng.gen_range(0..Opcode::ALL.len())];
    let n = rng.gen_range(0..7);
    ControlMessage::new(
        opcode,
        (0..n).map(|_| random_string(rng, 12, FIELD_CHARS)).collect::<Vec<_>>(),
    )
}

fn random_chat(rng: &mut ChaCha8Rng) -> ChatMessage {
    let text_chars: Vec<char> = FIELD_CHARS
        .iter()
        .copied()
        .filter(|c| !matches!(c, '\n' | '\r'))
        .collect();
    let sender_chars: Vec<char> = text_chars.iter().copied().filter(|c| *c != '>').collect();
    let sender = loop {
        let s = random_string(rng, 10, &sender_chars);
        if !s.is_empty() && !s.starts_with("#!") {
            break s;
        }
    };
    let mut text = random_string(rng, 20, &text_chars);
    if rng.gen_bool(0.2) {
        text = format!("{}#!{}", " ".repeat(rng.gen_range(0..3)), text);
    }
    ChatMessage::new(sender, text)
}

fn fuzz_line(rng: &mut ChaCha8Rng, seeds: &[String]) -> String {
    match rng.gen_range(0..3) {
        0 => {
            let bytes: Vec<u8> = (0..rng.gen_range(0..40)).map(|_| rng.gen()).collect();
            String::from_utf8_lossy(&bytes).into_owned()
        }
        1 => {
            let mut chars: Vec<char> = seeds[rng.gen_range(0..seeds.len())].chars().collect();
            for _ in 0..rng.gen_range(1..4) {
                let c = FIELD_CHARS[rng.gen_range(0..FIELD_CHARS.len())];
                match rng.gen_range(0..3) {
                    0 if !chars.is_empty() => {
                        let i = rng.gen_range(0..chars.len());
                        chars.remove(i);
                    }
                    1 => {
                        let i = rng.gen_range(0..=chars.len());
                        chars.insert(i, c);
                    }
                    _ if !chars.is_empty() => {
                        let i = rng.gen_range(0..chars.len());
                        chars[i] = c;
                    }
                    _ => chars.push(c),
                }
            }
            chars.into_iter().collect()
        }
        _ => {
            let syntax = ['#', '!', '|', '\\', '>', 'p', 'n', 'r', 'x', ' '];
            let op = Opcode::ALL[rng.gen_range(0..Opcode::ALL.len())].as_str();
            format!("#!{op}{}", random_string(rng, 16, &syntax))
        }
    }
}

pub fn run() -> crate::Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x00C0_DEC0);
    let mut seeds = Vec::new();
    let (mut controls, mut chats) = (0, 0);
    for i in 0..ROUND_TRIPS {
        let msg: Message = if i % 2 == 0 {
            controls += 1;
            random_control(&mut rng).into()
        } else {
            chats += 1;
            random_chat(&mut rng).into()
        };
        let frame = encode(&msg).map_err(|e| format!("encode failed for {msg:?}: {e}"))?;
        ensure(!frame.as_str().contains(['\n', '\r']), || {
            format!("frame has a line terminator: {frame:?}")
        })?;
        let back = decode_frame(frame.as_str()).map_err(|e| format!("decode of {frame:?} failed: {e}"))?;
        ensure(back == msg, || {
            format!("round trip changed {msg:?} into {back:?} via {frame:?}")
        })?;
        if seeds.len() < 512 {
            seeds.push(frame.into_string());
        }
    }
    let mut accepted = 0;
    for _ in 0..FUZZ_FRAMES {
        let line = fuzz_line(&mut rng, &seeds);
        match catch_unwind(|| decode_frame(&line)) {
            Ok(Ok(_)) => accepted += 1,
            Ok(Err(_)) => {}
            Err(_) => return Err(format!("decode panicked on {line:?}")),
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < BUDGET, || format!("took {elapsed:?}, budget {BUDGET:?}"))?;
    Ok(format!(
        "{ROUND_TRIPS} round trips ({controls} control, {chats} chat) exact; {FUZZ_FRAMES} fuzz frames, 0 panics, {accepted} decoded; {:.2}s < 10s",
        elapsed.as_secs_f64()
    ))
}
