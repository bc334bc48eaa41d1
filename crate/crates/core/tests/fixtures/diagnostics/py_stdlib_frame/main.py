import json


def load(text):
    return json.loads(text)


config = load("{bad json}")
print(config)
