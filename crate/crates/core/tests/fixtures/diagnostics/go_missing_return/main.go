package main

import "fmt"

func sign(v int) int {
	if v > 0 {
		return 1
	} else if v < 0 {
		return -1
	}
}

func main() {
	fmt.Println(sign(2))
}
