def ratio(a, b):
    scaled = a * 100
    return scaled / b
