//! Deterministic synthetic text: a topical general-domain corpus for
//! language-model pretraining and labeled tweets for classification.
//!
//! Sentences come from a small phrase grammar over per-topic word lists.
//! Flood tweets use the flood topic's content words; every other tweet uses
//! one of the remaining topics. Function words, place names and tweet noise
//! (retweet prefixes, mentions, links, hashtags, numbers) are shared, so the
//! two classes are separable by content vocabulary alone.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{Label, RawTweet};
use crate::error::{bail, Result};
use crate::numerics::{streams, RngStream};

/// Content vocabulary of one topic.
#[derive(Debug, Clone, Copy)]
pub struct Topic {
    pub name: &'static str,
    pub nouns: &'static [&'static str],
    pub verbs: &'static [&'static str],
    pub adjectives: &'static [&'static str],
    pub phrases: &'static [&'static str],
    pub hashtags: &'static [&'static str],
}

pub const FLOOD: Topic = Topic {
    name: "flood",
    nouns: &[
        "flood",
        "floodwater",
        "floodwaters",
        "river",
        "rain",
        "rainfall",
        "storm",
        "creek",
        "levee",
        "evacuation",
        "sandbags",
        "rescue",
        "dam",
        "flooding",
        "cyclone",
        "warning",
        "emergency",
        "shelter",
        "boat",
        "inundation",
        "damage",
        "residents",
        "crews",
        "volunteers",
        "evacuees",
        "deluge",
        "torrent",
        "downpour",
        "waterway",
        "riverbank",
        "catchment",
        "spillway",
        "gauge",
        "peak",
        "surge",
        "mud",
        "debris",
        "swiftwater",
        "lifeline",
        "sandbagging",
        "runoff",
        "monsoon",
    ],
    verbs: &[
        "floods",
        "swamps",
        "inundates",
        "submerges",
        "overflows",
        "breaches",
        "engulfs",
        "evacuates",
        "rescues",
        "threatens",
        "cuts",
        "isolates",
        "sweeps",
        "rises",
        "peaks",
        "drowns",
        "strands",
        "batters",
        "soaks",
    ],
    adjectives: &[
        "flooded",
        "rising",
        "swollen",
        "muddy",
        "torrential",
        "submerged",
        "stranded",
        "waterlogged",
        "inundated",
        "dangerous",
        "severe",
        "evacuated",
        "drenched",
        "soaked",
        "overflowing",
    ],
    phrases: &[
        "stay safe",
        "please share",
        "do not drive through floodwater",
        "evacuation centre open",
        "roads closed",
        "water still rising",
        "thoughts with everyone affected",
    ],
    hashtags: &[
        "#qldfloods",
        "#bigwet",
        "#floodwatch",
        "#thinkbeforeyoudrive",
    ],
};

pub const OTHER_TOPICS: [Topic; 8] = [
    Topic {
        name: "food",
        nouns: &[
            "pizza",
            "coffee",
            "breakfast",
            "lunch",
            "dinner",
            "burger",
            "salad",
            "chef",
            "cafe",
            "restaurant",
            "recipe",
            "pancakes",
            "sushi",
            "chocolate",
            "dessert",
            "menu",
            "bakery",
            "noodles",
            "brunch",
            "snack",
        ],
        verbs: &[
            "cooks", "bakes", "serves", "orders", "tastes", "grills", "eats", "craves", "roasts",
            "fries",
        ],
        adjectives: &[
            "delicious",
            "tasty",
            "spicy",
            "sweet",
            "fresh",
            "crispy",
            "yummy",
            "hungry",
            "savoury",
            "cheesy",
        ],
        phrases: &["so good", "best meal ever", "need more coffee", "food coma"],
        hashtags: &["#foodie", "#brunch", "#yum"],
    },
    Topic {
        name: "sport",
        nouns: &[
            "game",
            "match",
            "team",
            "coach",
            "goal",
            "season",
            "league",
            "player",
            "stadium",
            "final",
            "cricket",
            "footy",
            "rugby",
            "tennis",
            "score",
            "fans",
            "referee",
            "trophy",
            "innings",
            "premiership",
        ],
        verbs: &[
            "wins",
            "loses",
            "scores",
            "beats",
            "defends",
            "tackles",
            "kicks",
            "trains",
            "celebrates",
            "plays",
        ],
        adjectives: &[
            "unbeaten",
            "winning",
            "epic",
            "brilliant",
            "fit",
            "injured",
            "champion",
            "sporty",
            "fast",
            "tough",
        ],
        phrases: &[
            "what a game",
            "go team",
            "huge win tonight",
            "cannot wait for the final",
        ],
        hashtags: &["#footy", "#nrl", "#cricket"],
    },
    Topic {
        name: "music",
        nouns: &[
            "song", "album", "concert", "band", "guitar", "singer", "playlist", "gig", "festival",
            "tour", "lyrics", "drummer", "track", "chorus", "stage", "tickets", "encore", "vinyl",
            "radio", "melody",
        ],
        verbs: &[
            "sings", "plays", "releases", "records", "performs", "streams", "drops", "rocks",
            "tours", "hums",
        ],
        adjectives: &[
            "catchy",
            "loud",
            "acoustic",
            "live",
            "amazing",
            "new",
            "favourite",
            "classic",
            "groovy",
            "mellow",
        ],
        phrases: &[
            "on repeat",
            "best concert ever",
            "this song though",
            "cannot stop listening",
        ],
        hashtags: &["#nowplaying", "#newmusic", "#gig"],
    },
    Topic {
        name: "work",
        nouns: &[
            "meeting",
            "office",
            "boss",
            "deadline",
            "project",
            "email",
            "report",
            "client",
            "job",
            "interview",
            "colleague",
            "presentation",
            "shift",
            "payday",
            "desk",
            "manager",
            "budget",
            "spreadsheet",
            "promotion",
            "contract",
        ],
        verbs: &[
            "schedules",
            "emails",
            "presents",
            "hires",
            "manages",
            "finishes",
            "reviews",
            "delays",
            "signs",
            "approves",
        ],
        adjectives: &[
            "busy",
            "productive",
            "boring",
            "urgent",
            "overtime",
            "corporate",
            "tired",
            "stressful",
            "remote",
            "weekly",
        ],
        phrases: &[
            "so many emails",
            "long day at work",
            "finally friday",
            "back to the grind",
        ],
        hashtags: &["#mondaymotivation", "#worklife", "#hustle"],
    },
    Topic {
        name: "travel",
        nouns: &[
            "flight", "airport", "hotel", "holiday", "beach", "passport", "luggage", "trip",
            "resort", "island", "tourist", "cruise", "camping", "backpack", "souvenir", "roadtrip",
            "sunset", "map", "hostel", "journey",
        ],
        verbs: &[
            "flies", "books", "visits", "explores", "packs", "lands", "departs", "wanders",
            "checks", "cruises",
        ],
        adjectives: &[
            "sunny",
            "relaxing",
            "exotic",
            "scenic",
            "tropical",
            "cheap",
            "adventurous",
            "jetlagged",
            "lovely",
            "peaceful",
        ],
        phrases: &[
            "wish you were here",
            "holiday mode on",
            "paradise found",
            "best trip ever",
        ],
        hashtags: &["#travel", "#wanderlust", "#holiday"],
    },
    Topic {
        name: "shopping",
        nouns: &[
            "sale",
            "store",
            "mall",
            "shoes",
            "dress",
            "discount",
            "bargain",
            "jacket",
            "checkout",
            "receipt",
            "boutique",
            "handbag",
            "jeans",
            "coupon",
            "wardrobe",
            "outfit",
            "shopper",
            "brand",
            "voucher",
            "catalogue",
        ],
        verbs: &[
            "buys", "sells", "shops", "returns", "tries", "wears", "spends", "saves", "browses",
            "stocks",
        ],
        adjectives: &[
            "stylish",
            "expensive",
            "trendy",
            "cute",
            "fashionable",
            "comfy",
            "pricey",
            "cheap",
            "gorgeous",
            "shiny",
        ],
        phrases: &[
            "treat yourself",
            "shopping spree",
            "half price everything",
            "need this",
        ],
        hashtags: &["#fashion", "#sale", "#ootd"],
    },
    Topic {
        name: "family",
        nouns: &[
            "mum",
            "dad",
            "baby",
            "kids",
            "birthday",
            "wedding",
            "party",
            "grandma",
            "sister",
            "brother",
            "puppy",
            "cousin",
            "anniversary",
            "family",
            "toddler",
            "nephew",
            "niece",
            "cake",
            "presents",
            "picnic",
        ],
        verbs: &[
            "hugs",
            "celebrates",
            "visits",
            "laughs",
            "cuddles",
            "invites",
            "surprises",
            "raises",
            "adopts",
            "giggles",
        ],
        adjectives: &[
            "happy",
            "cute",
            "proud",
            "sweet",
            "little",
            "beautiful",
            "funny",
            "sleepy",
            "adorable",
            "grateful",
        ],
        phrases: &[
            "love you all",
            "best day ever",
            "so proud",
            "happy birthday",
        ],
        hashtags: &["#family", "#blessed", "#love"],
    },
    Topic {
        name: "tech",
        nouns: &[
            "phone", "laptop", "app", "update", "wifi", "computer", "software", "battery",
            "screen", "website", "password", "internet", "tablet", "gadget", "charger", "keyboard",
            "server", "download", "bug", "camera",
        ],
        verbs: &[
            "crashes",
            "updates",
            "installs",
            "downloads",
            "charges",
            "codes",
            "streams",
            "connects",
            "reboots",
            "uploads",
        ],
        adjectives: &[
            "slow", "wireless", "digital", "smart", "glitchy", "broken", "fast", "online", "sleek",
            "buggy",
        ],
        phrases: &[
            "why is the wifi so slow",
            "new phone who dis",
            "turn it off and on again",
            "battery at one percent",
        ],
        hashtags: &["#tech", "#apple", "#android"],
    },
];

const DETERMINERS: &[&str] = &["the", "a", "this", "that", "our", "my", "every", "another"];
const PREPOSITIONS: &[&str] = &[
    "in", "near", "at", "across", "around", "outside", "through", "along", "behind", "beyond",
];
const PLACES: &[&str] = &[
    "brisbane",
    "ipswich",
    "toowoomba",
    "rockhampton",
    "bundaberg",
    "queensland",
    "gympie",
    "maryborough",
    "logan",
    "townsville",
    "cairns",
    "mackay",
    "gladstone",
    "emerald",
    "dalby",
    "lockyer",
    "goodna",
    "sydney",
    "melbourne",
    "town",
    "city",
    "suburb",
    "valley",
    "street",
    "park",
    "coast",
    "centre",
    "north",
    "south",
    "west",
];
const TIMES: &[&str] = &[
    "today",
    "tonight",
    "yesterday",
    "this morning",
    "this afternoon",
    "last night",
    "right now",
    "on monday",
    "on friday",
    "this weekend",
    "again",
    "later",
];
const ADVERBS: &[&str] = &[
    "quickly", "slowly", "again", "badly", "finally", "suddenly", "really", "still", "already",
    "almost",
];
const CONNECTORS: &[&str] = &[
    "and", "but", "while", "so", "because", "as", "after", "before",
];
const FILLERS: &[&str] = &[
    "omg",
    "wow",
    "just",
    "so",
    "yes",
    "hey",
    "ok",
    "ugh",
    "seriously",
    "honestly",
];
const USERS: &[&str] = &[
    "abcnews",
    "couriermail",
    "qldpolice",
    "bccweather",
    "7news",
    "mike_j",
    "sarah88",
    "tomw",
    "jess_k",
    "bnetimes",
];

fn pick<'a>(rng: &mut RngStream, items: &[&'a str]) -> &'a str {
    items[rng.index(items.len())]
}

fn chance(rng: &mut RngStream, p: f64) -> bool {
    rng.next_f64() < p
}

fn noun_phrase(rng: &mut RngStream, topic: &Topic, out: &mut Vec<String>) {
    out.push(String::from(pick(rng, DETERMINERS)));
    if chance(rng, 0.5) {
        out.push(String::from(pick(rng, topic.adjectives)));
    }
    out.push(String::from(pick(rng, topic.nouns)));
}

fn clause(rng: &mut RngStream, topic: &Topic, out: &mut Vec<String>) {
    match rng.index(4) {
        0 => {
            noun_phrase(rng, topic, out);
            out.push(String::from(pick(rng, topic.verbs)));
            noun_phrase(rng, topic, out);
            out.push(String::from(pick(rng, PREPOSITIONS)));
            out.push(String::from(pick(rng, PLACES)));
        }
        1 => {
            out.push(String::from(pick(rng, TIMES)));
            noun_phrase(rng, topic, out);
            out.push(String::from(pick(rng, topic.verbs)));
            out.push(String::from(pick(rng, PREPOSITIONS)));
            noun_phrase(rng, topic, out);
        }
        2 => {
            noun_phrase(rng, topic, out);
            out.push(String::from(pick(rng, PREPOSITIONS)));
            out.push(String::from(pick(rng, PLACES)));
            out.push(String::from(pick(rng, topic.verbs)));
            out.push(String::from(pick(rng, ADVERBS)));
        }
        _ => {
            noun_phrase(rng, topic, out);
            out.push(String::from("is"));
            out.push(String::from(pick(rng, topic.adjectives)));
            out.push(String::from(pick(rng, TIMES)));
        }
    }
}

/// One sentence (one or two clauses) about `topic`, as words.
pub fn sentence(rng: &mut RngStream, topic: &Topic) -> Vec<String> {
    let mut out = Vec::new();
    clause(rng, topic, &mut out);
    if chance(rng, 0.3) {
        out.push(String::from(pick(rng, CONNECTORS)));
        clause(rng, topic, &mut out);
    }
    out
}

/// All topics, flood first.
pub fn topics() -> Vec<&'static Topic> {
    core::iter::once(&FLOOD)
        .chain(OTHER_TOPICS.iter())
        .collect()
}

/// General-domain prose: paragraphs of same-topic sentences, one paragraph
/// per line, until at least `min_tokens` words have been produced.
pub fn general_corpus(min_tokens: usize, seed: u64) -> Vec<String> {
    let mut rng = RngStream::new(seed, streams::SYNTHETIC);
    let all = topics();
    let mut lines = Vec::new();
    let mut produced = 0;
    while produced < min_tokens {
        let topic = all[rng.index(all.len())];
        let mut words: Vec<String> = Vec::new();
        for _ in 0..4 + rng.index(6) {
            let s = sentence(&mut rng, topic);
            let mut s = s.join(" ");
            s.push('.');
            words.push(s);
        }
        let line = words.join(" ");
        produced += line.split(' ').count();
        lines.push(line);
    }
    lines
}

/// Parameters of the synthetic tweet generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TweetConfig {
    pub count: usize,
    pub related_fraction: f64,
    pub seed: u64,
}

impl TweetConfig {
    pub fn new(count: usize, seed: u64) -> TweetConfig {
        TweetConfig {
            count,
            related_fraction: 0.54,
            seed,
        }
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Raw text of one tweet about `topic`, with the usual tweet noise.
pub fn tweet_text(rng: &mut RngStream, topic: &Topic) -> String {
    let mut parts: Vec<String> = Vec::new();
    if chance(rng, 0.3) {
        parts.push(format!("RT @{}:", pick(rng, USERS)));
    }
    if chance(rng, 0.2) {
        parts.push(String::from(pick(rng, FILLERS)));
    }
    let mut words = sentence(rng, topic);
    if chance(rng, 0.2) {
        words.push(format!("{}", 2 + rng.index(98)));
    }
    if chance(rng, 0.3) {
        words.extend(pick(rng, topic.phrases).split(' ').map(String::from));
    }
    if let Some(first) = words.first_mut() {
        if chance(rng, 0.5) {
            *first = capitalize(first);
        }
    }
    parts.extend(words);
    if chance(rng, 0.4) {
        parts.push(String::from(pick(rng, topic.hashtags)));
    }
    if chance(rng, 0.15) {
        parts.push(format!("@{}", pick(rng, USERS)));
    }
    if chance(rng, 0.35) {
        parts.push(format!("http://t.co/{:08x}", rng.next_u64() as u32));
    }
    parts.join(" ")
}

/// Labeled tweets: `Related` ones talk about floods, `Unrelated` ones about
/// any other topic. Ids are `syn-<index>`.
pub fn synthetic_tweets(cfg: &TweetConfig) -> Result<Vec<RawTweet>> {
    if !(0.0..=1.0).contains(&cfg.related_fraction) {
        bail!(
            Config,
            "related fraction {} outside [0, 1]",
            cfg.related_fraction
        );
    }
    let mut rng = RngStream::new(cfg.seed, streams::SYNTHETIC_TWEETS);
    Ok((0..cfg.count)
        .map(|i| {
            let related = chance(&mut rng, cfg.related_fraction);
            let topic = if related {
                &FLOOD
            } else {
                &OTHER_TOPICS[rng.index(OTHER_TOPICS.len())]
            };
            let label = if related {
                Label::Related
            } else {
                Label::Unrelated
            };
            RawTweet::new(
                format!("syn-{}", i),
                tweet_text(&mut rng, topic),
                Some(label),
            )
        })
        .collect())
}
