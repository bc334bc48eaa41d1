import sys

def main():
    print("args:", len(sys.argv)


main()
