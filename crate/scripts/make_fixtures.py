#!/usr/bin/env python3
"""Generate the movie, restaurant and tourist fixtures under data/.

Output is a pure function of the seed below, so re-running the script
reproduces the shipped files byte for byte.

    python3 scripts/make_fixtures.py [out_dir]
"""

import json
import random
import sys
from pathlib import Path

SEED = 20180201
INTENTS = ["inform", "request", "thanks", "deny", "close"]

VALUES = {
    "address": ["1 main st", "22 oak ave", "5 pier rd", "9 hill ln", "40 mill st", "7 bank sq", "13 elm ct", "60 park way"],
    "area": ["centre", "north", "south", "east", "west"],
    "childrenallowed": ["yes", "no"],
    "city": ["seattle", "portland", "boston", "austin"],
    "date": ["today", "tomorrow", "friday", "saturday"],
    "food": ["italian", "chinese", "indian", "thai", "french"],
    "genre": ["comedy", "drama", "action", "horror"],
    "hasinternet": ["yes", "no"],
    "moviename": ["avengers", "zootopia", "deadpool", "inferno", "moana", "arrival"],
    "name": ["la tasca", "golden wok", "curry house", "bangkok city", "le bistro", "pasta bar", "spice garden", "blue door"],
    "near": ["museum", "station", "river", "market", "university"],
    "numberofpeople": ["1", "2", "3", "4", "5"],
    "phone": ["555-0101", "555-0102", "555-0103", "555-0104", "555-0105", "555-0106", "555-0107", "555-0108"],
    "pricerange": ["cheap", "moderate", "expensive"],
    "starttime": ["6pm", "7pm", "8pm", "9pm"],
    "theater": ["regal", "amc", "cinemark", "majestic", "odeon"],
    "type": ["restaurant", "pub", "cafe", "hotel"],
}

MOVIE = ["city", "date", "genre", "moviename", "numberofpeople", "starttime", "theater"]
RESTAURANT = ["address", "area", "city", "date", "food", "name", "numberofpeople", "phone", "pricerange", "starttime"]
TOURIST = RESTAURANT + ["childrenallowed", "hasinternet", "near", "type"]

# Slots users typically ask for rather than constrain.
REQUESTABLE = {
    "movie": ["theater", "starttime", "moviename", "date", "city"],
    "restaurant": ["name", "address", "phone", "starttime", "area", "pricerange"],
    "tourist": ["name", "address", "phone", "starttime", "area", "pricerange", "near", "type", "hasinternet"],
}
EXTRA_TOURIST = ["childrenallowed", "hasinternet", "near", "type"]


# Attributes fixed per entity (a venue, a film, a cinema); the remaining
# slots describe a booking and vary per record.
ENTITY_SLOTS = {
    "movie": [["moviename", "genre"], ["theater", "city"]],
    "restaurant": [["name", "address", "phone", "area", "food", "pricerange", "city"]],
    "tourist": [["name", "address", "phone", "area", "food", "pricerange", "city", "type", "near", "hasinternet", "childrenallowed"]],
}
N_ENTITIES = 8


def kb_records(rng, domain, slots, n):
    groups = []
    for group in ENTITY_SLOTS[domain]:
        entities = []
        # The first slot of a group identifies the entity; slots with at
        # least as many values as entities (address, phone) are unique too.
        n_entities = min(N_ENTITIES, len(VALUES[group[0]]))
        for i in range(n_entities):
            entity = {}
            for s in group:
                values = VALUES[s]
                entity[s] = values[i] if len(values) >= n_entities and s in (group[0], "address", "phone") else rng.choice(values)
            entities.append(entity)
        groups.append(entities)
    booking = [s for s in slots if not any(s in g for g in ENTITY_SLOTS[domain])]
    records = []
    for _ in range(n):
        record = {}
        for entities in groups:
            record.update(rng.choice(entities))
        record.update({s: rng.choice(VALUES[s]) for s in booking})
        records.append({s: record[s] for s in slots})
    return records


def weighted(rng, options):
    r = rng.random()
    acc = 0.0
    for value, p in options:
        acc += p
        if r < acc:
            return value
    return options[-1][0]


def make_goal(rng, domain, slots, records):
    record = rng.choice(records)
    n_requests = weighted(rng, [(1, 0.55), (2, 0.3), (3, 0.15)])
    requestable = list(REQUESTABLE[domain])
    requests = []
    if domain == "tourist":
        # One tourist-only request plus restaurant-style ones. The draw is
        # kept so the shipped files stay byte-identical.
        requestable = [s for s in requestable if s not in EXTRA_TOURIST]
        rng.random()
        requests.append(rng.choice(EXTRA_TOURIST))
        n_requests -= 1
    requests += rng.sample(requestable, min(n_requests, len(requestable)))
    free = [s for s in slots if s not in requests]
    if domain == "tourist":
        free = [s for s in free if s not in EXTRA_TOURIST or rng.random() < 0.2]
    n_informs = weighted(rng, [(1, 0.2), (2, 0.35), (3, 0.3), (4, 0.15)])
    informs = rng.sample(free, min(n_informs, len(free)))
    return {
        "inform_slots": {s: record[s] for s in sorted(informs)},
        "request_slots": sorted(requests),
    }


def write_json(path, value):
    path.write_text(json.dumps(value, indent=1, sort_keys=False) + "\n")


def build(out, name, slots, n_records, rng):
    d = out / name
    d.mkdir(parents=True, exist_ok=True)
    records = kb_records(rng, name, slots, n_records)
    write_json(d / "schema.json", {"name": name, "slots": slots, "user_intents": INTENTS, "kb": "kb.json"})
    write_json(d / "kb.json", records)
    for split, n in [("goals_train.json", 120), ("goals_test.json", 32)]:
        write_json(d / split, [make_goal(rng, name, slots, records) for _ in range(n)])


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data"
    rng = random.Random(SEED)
    build(out, "movie", MOVIE, 60, rng)
    build(out, "restaurant", RESTAURANT, 80, rng)
    build(out, "tourist", TOURIST, 80, rng)


if __name__ == "__main__":
    main()
