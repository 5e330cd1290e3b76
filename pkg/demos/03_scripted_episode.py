"""A full scripted episode: explore, detect, ask once, stop at the target.

The room holds one black-framed picture (the target) and two white-framed
look-alikes. The scripted backends describe whatever instance the agent
inspects; the simulated user, who knows the target, answers "black" when
asked. One question is enough to dismiss both distractors.
"""

import json
from pathlib import Path

from asknav import EngineBackends, EngineConfig, StubBackend, StubScript
from asknav.batch import run_batch
from asknav.episode import episode_from_dict, run_episode, save_episode

ROOT = Path(__file__).resolve().parent.parent
EPISODE = json.loads((ROOT / "scenarios/episodes/room_black_frame.json").read_text())
STUB = ROOT / "scenarios/stub.json"

spec = episode_from_dict(EPISODE, episode_id="demo")
script = StubScript.load(STUB)
backends = EngineBackends(llm=StubBackend(script), vlm=StubBackend(script))

result = run_episode(spec, EngineConfig(), backends)

print("outcome:", result.outcome.value)
print("questions asked:", result.questions_asked)
print(f"path: {result.path_length_m} m (shortest possible {spec.shortest_path_m} m)")
print(f"actions: {result.actions_taken}")

print("\nhighlights from the transcript:")
for event in result.transcript:
    if event["type"] == "detection":
        print(f"  detected {event['instance_id']} at {event['cell']}")
    elif event["type"] == "question":
        print(f"  agent asks: {event['text']}")
    elif event["type"] == "answer":
        print(f"  user answers: {event['text']}")
    elif event["type"] == "trigger":
        print(f"  trigger: {event['kind']} (score {event.get('score')})")

# The same episode through the batch runner, which also writes reports:
import tempfile

with tempfile.TemporaryDirectory() as tmp:
    episodes = Path(tmp) / "episodes"
    episodes.mkdir()
    save_episode(spec, episodes / "demo.json")
    report = run_batch(episodes, EngineConfig(), backends, Path(tmp) / "out")
    print("\nbatch report: SR", report.sr, "SPL", round(report.spl, 2), "NQ", report.nq)
    print("batch artifacts: report.json, report.csv, transcripts/ (JSON lines)")
