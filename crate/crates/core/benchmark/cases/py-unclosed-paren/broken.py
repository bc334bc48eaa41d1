import json


def load_settings(text):
    data = json.loads(text)
    return {key.lower(): value for key, value in data.items()}


raw = '{"Mode": "fast", "Level": 3}'
settings = load_settings(raw)
for key, value in sorted(settings.items():
    print(key, value)
print("done")
