def parse_port(raw):
    try:
        return int(raw)
    except ValueError:
        raise RuntimeError("invalid port: " + raw)


parse_port("http")
