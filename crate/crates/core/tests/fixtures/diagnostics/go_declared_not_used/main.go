package main

import "fmt"

func main() {
	total := 0
	count := 3
	fmt.Println(total)
}
