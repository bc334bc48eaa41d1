def describe(temperatures):
    hottest = max(temperatures)
    coldest = min(temperatures)
    return f"range {coldest}..{hottest}"


readings = [18, 22, 15, 27]
print(describe(readings))
for value in readings:
    if value > 20:
        print("warm", value)
