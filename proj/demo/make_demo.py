#!/usr/bin/env python3
"""Regenerates the scripted demo fixture: catalog, tasks, backend rules, run config.

The scripted agent solves train tasks t1-t3, buys with a missing option on t4
and stalls on t5. On the eval split it solves e1, under-buys on e2 and solves
e3 only when its observation is a focused contextualization.
"""

import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent

KINDS = ["candle", "mug", "notebook", "backpack", "lamp", "pillow", "scarf", "teapot",
         "headphones", "wallet", "blanket", "planter"]
ADJECTIVES = ["ceramic", "bamboo", "leather", "cotton", "glass", "steel", "wool", "linen"]
VARIANTS = ["classic", "travel", "deluxe", "mini", "studio"]
ATTRIBUTES = ["eco friendly", "handmade", "gift ready", "dishwasher safe", "water resistant",
              "lightweight", "machine washable"]
COLORS = ["red", "blue", "green", "black", "white", "grey"]
SIZES = ["small", "medium", "large"]

FOCUS = ("<reasoning>The instruction is partly done; the marked elements lead to the next step."
         "</reasoning>\n<extraction>FOCUS\nThe elements needed for the next action are on this page."
         "</extraction>")
UNFOCUSED = ("<reasoning>The page has just loaded.</reasoning>\n"
             "<extraction>The page offers a search box.</extraction>")
JUDGE = "Feedback: The predicted action does not carry the same content as the reference. [RESULT] 0"


def build_catalog():
    rng = random.Random(7)
    items = []
    n = 0
    for kind in KINDS:
        for adjective in rng.sample(ADJECTIVES, 5):
            n += 1
            variant = VARIANTS[n % len(VARIANTS)]
            options = {}
            if n % 3 != 0:
                options["color"] = rng.sample(COLORS, 3)
            if n % 2 == 0:
                options["size"] = list(SIZES)
            items.append({
                "id": f"B{n:03d}",
                "title": f"{adjective.title()} {kind.title()} {variant.title()}",
                "price": round(rng.uniform(8, 60), 2),
                "attributes": sorted(rng.sample(ATTRIBUTES, 2)),
                "options": options,
            })
    return items


def tokens(text):
    return text.lower().split()


def search(items, query):
    q = set(tokens(query))
    scored = []
    for item in items:
        words = set(tokens(item["title"]))
        for a in item["attributes"]:
            words |= set(tokens(a))
        overlap = len(q & words)
        if overlap:
            scored.append((-overlap, item["id"], item))
    return [s[2] for s in sorted(scored, key=lambda s: (s[0], s[1]))]


def history(actions):
    if not actions:
        return "None"
    return "\n".join(f"{i + 1}. {a}" for i, a in enumerate(actions))


def agent_key(instruction, actions):
    return f"Instruction: \n{instruction}\n\n{history(actions)}\n\nObservation: \n"


def make_task(task_id, item, tags):
    option_name = sorted(item["options"])[0]
    value = item["options"][option_name][0]
    budget = int(item["price"]) + 10
    attrs = item["attributes"][:1]
    instruction = (f"i want a {item['title'].lower()} that is {attrs[0]}, "
                   f"{option_name}: {value}, price lower than {budget}.00 dollars")
    return {
        "id": task_id,
        "instruction": instruction,
        "env_binding": "ToyShop",
        "split_tags": tags,
        "goal_spec": {"attributes": attrs, "options": {option_name: value}, "price_budget": float(budget)},
    }, value


def main():
    items = build_catalog()
    with_options = [i for i in items if i["options"]]

    picks = {"t1": 1, "t2": 7, "t3": 14, "t4": 20, "t5": 26, "e1": 33, "e2": 40, "e3": 47}
    tasks = []
    agent_rules = []
    ensemble_rules = []
    scripts = {}
    for task_id, index in picks.items():
        item = with_options[index]
        split = "train" if task_id.startswith("t") else "eval"
        task, value = make_task(task_id, item, [split])
        tasks.append(task)
        query = item["title"].lower()
        hits = search(items, query)
        assert hits[0]["id"] == item["id"], (task_id, hits[0]["id"])
        scripts[task_id] = (task["instruction"], [f"search[{query}]", f"click[{item['id']}]",
                                                  f"click[{value}]", "click[Buy Now]"], hits)

    def add_script(instruction, actions, rules, focus=False, priority=1):
        for k, action in enumerate(actions):
            key = agent_key(instruction, actions[:k]) + ("FOCUS" if focus else "")
            rules.append({"match": "contains", "pattern": key, "response": f"Action: {action}",
                          "priority": priority})

    for task_id in ("t1", "t2", "t3", "e1"):
        add_script(*scripts[task_id][:2], agent_rules)
    # t4 and e2: the right item bought without choosing the requested option.
    for task_id in ("t4", "e2"):
        instruction, actions, _ = scripts[task_id]
        add_script(instruction, [actions[0], actions[1], actions[3]], agent_rules)
    # e3: the right item is picked only from a focused observation; otherwise a
    # lower-ranked look-alike is bought.
    instruction, actions, hits = scripts["e3"]
    decoy = hits[1]["id"]
    search_done = [actions[0]]
    agent_rules += [
        {"match": "contains", "pattern": agent_key(instruction, []), "response": f"Action: {actions[0]}",
         "priority": 1},
        {"match": "contains", "pattern": agent_key(instruction, search_done) + "FOCUS",
         "response": f"Action: {actions[1]}", "priority": 0},
        {"match": "contains", "pattern": agent_key(instruction, search_done),
         "response": f"Action: click[{decoy}]", "priority": 1},
        {"match": "contains", "pattern": agent_key(instruction, actions[:2]), "response": f"Action: {actions[2]}",
         "priority": 1},
        {"match": "contains", "pattern": agent_key(instruction, actions[:3]), "response": f"Action: {actions[3]}",
         "priority": 1},
        {"match": "contains", "pattern": agent_key(instruction, search_done + [f"click[{decoy}]"]),
         "response": "Action: click[Buy Now]", "priority": 1},
    ]
    # t5 (and anything unscripted) stalls.
    agent_rules.append({"match": "always", "pattern": "", "response": "Action: click[Back to Search]",
                        "priority": 9})

    for task_id in ("t1", "t2", "t3"):
        add_script(*scripts[task_id][:2], ensemble_rules, focus=True)
    ensemble_rules.append({"match": "always", "pattern": "", "response": "Action: search[anything]",
                           "priority": 9})
    ensemble_tagged = [dict(r, response=r["response"].replace("Action: ", "<action>") + "</action>")
                       for r in ensemble_rules]

    ctx_rules = [
        {"match": "contains", "pattern": "Ground-truth next action:", "response": FOCUS, "priority": 0},
        {"match": "contains", "pattern": "[ Buy Now ]", "response": FOCUS, "priority": 1},
        {"match": "contains", "pattern": "Total results", "response": FOCUS, "priority": 1},
        {"match": "always", "pattern": "", "response": UNFOCUSED, "priority": 9},
    ]
    judge_rules = [{"match": "always", "pattern": "", "response": JUDGE, "priority": 0}]

    run = {
        "run_dir": "run",
        "env": {"kind": "toyshop", "catalog": "toyshop_catalog_v1.json", "max_steps": 15, "page_size": 10},
        "tasks": "tasks.json",
        "train_split": "train",
        "eval_split": "eval",
        "backends": {
            "agent": {"kind": "scripted", "rules": "rules/agent.json"},
            "ens_a": {"kind": "scripted", "rules": "rules/ensemble.json"},
            "ens_b": {"kind": "scripted", "rules": "rules/ensemble.json"},
            "ens_c": {"kind": "scripted", "rules": "rules/ensemble_tagged.json"},
            "ctx": {"kind": "scripted", "rules": "rules/contextualizer.json"},
            "judge": {"kind": "scripted", "rules": "rules/judge.json"},
        },
        "agent_backend": "agent",
        "ensemble": {"agents": ["ens_a", "ens_b", "ens_c"], "judge": "judge"},
        "contextualizer": {"initial": {"kind": "model", "backend": "ctx"}, "n": 3, "temperature": 0.7},
        "iterations": 2,
        "trainer": {"kind": "exemplar"},
        "keep_zero_reward_retry": True,
        "mode": "Contextualized",
        "gateway": {"parallelism": 4, "retry_attempts": 1, "backoff_ms": 0, "jitter": False},
        "episode_parallelism": 1,
    }

    def dump(path, doc):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc, indent=2) + "\n")

    dump(HERE / "toyshop_catalog_v1.json", items)
    dump(HERE / "tasks.json", tasks)
    dump(HERE / "rules" / "agent.json", agent_rules)
    dump(HERE / "rules" / "ensemble.json", ensemble_rules)
    dump(HERE / "rules" / "ensemble_tagged.json", ensemble_tagged)
    dump(HERE / "rules" / "contextualizer.json", ctx_rules)
    dump(HERE / "rules" / "judge.json", judge_rules)
    dump(HERE / "run.json", run)
    print(f"{len(items)} items, {len(tasks)} tasks, {len(agent_rules)} agent rules")


if __name__ == "__main__":
    main()
