package main

import "fmt"

func double(v int) int {
	return v * 2
}

func main() {
	fmt.Println(double(1, 2))
}
