def greet(name):
    message = "hello " + name
    return mesage


print(greet("ada"))
